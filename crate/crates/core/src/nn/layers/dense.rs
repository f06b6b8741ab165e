use rand_chacha::ChaCha8Rng;

use super::{glorot_uniform, no_cache, Mode, Module};
use crate::error::{Error, Result};
use crate::nn::tensor::{debug_assert_finite, gemm, Mat, MatMut, Param, Scalar, Tensor};

/// Affine map over the last dimension: `y = x·W + b`, `W` stored `in × out`.
#[derive(Debug, Clone)]
pub struct Dense<F: Scalar> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    input: Option<Tensor<F>>,
}

impl<F: Scalar> Dense<F> {
    pub fn new(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        Dense {
            weight: Param::new(glorot_uniform(&[inputs, outputs], inputs, outputs, rng)),
            bias: Param::new(Tensor::zeros(&[outputs])),
            input: None,
        }
    }

    pub fn from_params(weight: Tensor<F>, bias: Tensor<F>) -> Self {
        Dense {
            weight: Param::new(weight),
            bias: Param::new(bias),
            input: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn cast<G: Scalar>(&self) -> Dense<G> {
        Dense {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
            input: None,
        }
    }
}

impl<F: Scalar> Module<F> for Dense<F> {
    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> Result<Tensor<F>> {
        let (rows, cols) = x.as_matrix_dims();
        if cols != self.inputs() {
            return Err(Error::Shape(format!(
                "dense layer expects last dimension {}, got {:?}",
                self.inputs(),
                x.shape()
            )));
        }
        let out_dim = self.outputs();
        let mut out = Vec::with_capacity(rows * out_dim);
        for _ in 0..rows {
            out.extend_from_slice(&self.bias.value.data);
        }
        gemm(
            Mat::new(&x.data, rows, cols),
            Mat::new(&self.weight.value.data, cols, out_dim),
            F::one(),
            MatMut::new(&mut out, rows, out_dim),
        );
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = out_dim;
        self.input = Some(x.clone());
        let y = Tensor::from_vec(&shape, out)?;
        debug_assert_finite(&y, "dense forward");
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>> {
        let x = self.input.as_ref().ok_or_else(|| no_cache("dense"))?;
        let (rows, cols) = x.as_matrix_dims();
        let out_dim = self.outputs();
        if g.len() != rows * out_dim {
            return Err(Error::Shape(format!("dense backward got gradient {:?}", g.shape())));
        }
        // dW += xᵀ·g
        gemm(
            Mat::new(&x.data, rows, cols).t(),
            Mat::new(&g.data, rows, out_dim),
            F::one(),
            MatMut::new(&mut self.weight.grad.data, cols, out_dim),
        );
        for r in 0..rows {
            for (b, &gv) in self.bias.grad.data.iter_mut().zip(&g.data[r * out_dim..(r + 1) * out_dim]) {
                *b += gv;
            }
        }
        // dx = g·Wᵀ
        let mut dx = vec![F::zero(); rows * cols];
        gemm(
            Mat::new(&g.data, rows, out_dim),
            Mat::new(&self.weight.value.data, cols, out_dim).t(),
            F::zero(),
            MatMut::new(&mut dx, rows, cols),
        );
        let dx = Tensor::from_vec(x.shape(), dx)?;
        debug_assert_finite(&dx, "dense backward");
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn params(&self) -> Vec<&Param<F>> {
        vec![&self.weight, &self.bias]
    }

    fn state(&self) -> Vec<(&'static str, &Tensor<F>)> {
        vec![("weight", &self.weight.value), ("bias", &self.bias.value)]
    }

    fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor<F>)> {
        vec![("weight", &mut self.weight.value), ("bias", &mut self.bias.value)]
    }
}
