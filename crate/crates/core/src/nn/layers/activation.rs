use std::marker::PhantomData;

use super::{no_cache, Mode, Module};
use crate::error::Result;
use crate::nn::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Default)]
pub struct Relu<F: Scalar> {
    input: Option<Tensor<F>>,
}

impl<F: Scalar> Relu<F> {
    pub fn new() -> Self {
        Relu { input: None }
    }
}

impl<F: Scalar> Module<F> for Relu<F> {
    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> Result<Tensor<F>> {
        self.input = Some(x.clone());
        Ok(x.map(|v| v.max(F::zero())))
    }

    fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>> {
        let x = self.input.as_ref().ok_or_else(|| no_cache("relu"))?;
        let data = x
            .data
            .iter()
            .zip(&g.data)
            .map(|(&xv, &gv)| if xv > F::zero() { gv } else { F::zero() })
            .collect();
        Tensor::from_vec(x.shape(), data)
    }
}

pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid<F: Scalar> {
    output: Option<Tensor<F>>,
    _f: PhantomData<F>,
}

impl<F: Scalar> Sigmoid<F> {
    pub fn new() -> Self {
        Sigmoid {
            output: None,
            _f: PhantomData,
        }
    }
}

impl<F: Scalar> Module<F> for Sigmoid<F> {
    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> Result<Tensor<F>> {
        let y = x.map(sigmoid);
        self.output = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>> {
        let y = self.output.as_ref().ok_or_else(|| no_cache("sigmoid"))?;
        let data = y
            .data
            .iter()
            .zip(&g.data)
            .map(|(&yv, &gv)| gv * yv * (F::one() - yv))
            .collect();
        Tensor::from_vec(y.shape(), data)
    }
}
