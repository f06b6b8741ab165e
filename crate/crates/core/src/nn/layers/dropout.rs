use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Mode, Module};
use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Inverted dropout: in training, zeroes each unit with probability `rate`
/// and scales survivors by `1 / (1 - rate)`; identity in eval mode.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    rng: ChaCha8Rng,
    mask: Option<Vec<bool>>,
}

impl Dropout {
    pub fn new(rate: f64, rng: ChaCha8Rng) -> Self {
        Dropout { rate, rng, mask: None }
    }
}

impl<F: Scalar> Module<F> for Dropout {
    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        if mode == Mode::Eval || self.rate == 0.0 {
            self.mask = None;
            return Ok(x.clone());
        }
        let keep: Vec<bool> = (0..x.len()).map(|_| self.rng.gen::<f64>() >= self.rate).collect();
        let scale = F::lit(1.0 / (1.0 - self.rate));
        let data = x
            .data
            .iter()
            .zip(&keep)
            .map(|(&v, &k)| if k { v * scale } else { F::zero() })
            .collect();
        self.mask = Some(keep);
        Tensor::from_vec(x.shape(), data)
    }

    fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>> {
        let Some(mask) = &self.mask else {
            return Ok(g.clone());
        };
        if mask.len() != g.len() {
            return Err(Error::Shape("dropout gradient does not match its mask".into()));
        }
        let scale = F::lit(1.0 / (1.0 - self.rate));
        let data = g
            .data
            .iter()
            .zip(mask)
            .map(|(&v, &k)| if k { v * scale } else { F::zero() })
            .collect();
        Tensor::from_vec(g.shape(), data)
    }
}
