use super::{no_cache, Mode, Module};
use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Keeps the leading batch dimension and reshapes the rest to `tail`, or
/// drops a trailing unit dimension.
#[derive(Debug, Clone)]
pub struct Reshape {
    pub tail: Option<Vec<usize>>,
    input_shape: Option<Vec<usize>>,
}

impl Reshape {
    pub fn new(tail: &[usize]) -> Self {
        Reshape {
            tail: Some(tail.to_vec()),
            input_shape: None,
        }
    }

    pub fn squeeze_last() -> Self {
        Reshape {
            tail: None,
            input_shape: None,
        }
    }
}

impl<F: Scalar> Module<F> for Reshape {
    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> Result<Tensor<F>> {
        let Some(&batch) = x.shape().first() else {
            return Err(Error::Shape("reshape of a scalar".into()));
        };
        let shape = match &self.tail {
            Some(tail) => {
                let mut shape = vec![batch];
                shape.extend_from_slice(tail);
                shape
            }
            None => match x.shape().split_last() {
                Some((1, rest)) if !rest.is_empty() => rest.to_vec(),
                _ => return Err(Error::Shape(format!("cannot drop the last dimension of {:?}", x.shape()))),
            },
        };
        self.input_shape = Some(x.shape().to_vec());
        x.clone().reshape(&shape)
    }

    fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>> {
        let s = self.input_shape.as_ref().ok_or_else(|| no_cache("reshape"))?;
        g.clone().reshape(s)
    }
}
