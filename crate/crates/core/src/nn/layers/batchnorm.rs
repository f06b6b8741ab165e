use super::{no_cache, Mode, Module};
use crate::error::{Error, Result};
use crate::nn::tensor::{debug_assert_finite, Param, Scalar, Tensor};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Batch normalization over the last dimension. Training mode normalizes with
/// the batch mean and biased variance and folds them into the running
/// statistics with momentum 0.1; eval mode uses the running statistics.
#[derive(Debug, Clone)]
pub struct BatchNorm<F: Scalar> {
    pub gamma: Param<F>,
    pub beta: Param<F>,
    pub running_mean: Tensor<F>,
    pub running_var: Tensor<F>,
    cache: Option<BnCache<F>>,
}

#[derive(Debug, Clone)]
struct BnCache<F> {
    mode: Mode,
    shape: Vec<usize>,
    x_hat: Vec<F>,
    inv_std: Vec<F>,
}

impl<F: Scalar> BatchNorm<F> {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            gamma: Param::new(Tensor::full(&[features], F::one())),
            beta: Param::new(Tensor::zeros(&[features])),
            running_mean: Tensor::zeros(&[features]),
            running_var: Tensor::full(&[features], F::one()),
            cache: None,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.value.len()
    }

    pub fn cast<G: Scalar>(&self) -> BatchNorm<G> {
        BatchNorm {
            gamma: self.gamma.cast(),
            beta: self.beta.cast(),
            running_mean: self.running_mean.cast(),
            running_var: self.running_var.cast(),
            cache: None,
        }
    }
}

impl<F: Scalar> Module<F> for BatchNorm<F> {
    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let (rows, feats) = x.as_matrix_dims();
        if feats != self.features() {
            return Err(Error::Shape(format!(
                "batchnorm over {} features got {:?}",
                self.features(),
                x.shape()
            )));
        }
        let eps = F::lit(BN_EPSILON);
        let (mean, var) = match mode {
            Mode::Train => {
                if rows == 0 {
                    return Err(Error::Shape("batchnorm on an empty batch".into()));
                }
                let n = F::from_usize(rows).unwrap();
                let mut mean = vec![F::zero(); feats];
                for r in 0..rows {
                    for (m, &v) in mean.iter_mut().zip(&x.data[r * feats..(r + 1) * feats]) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m = *m / n);
                let mut var = vec![F::zero(); feats];
                for r in 0..rows {
                    for ((s, &v), &m) in var.iter_mut().zip(&x.data[r * feats..(r + 1) * feats]).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s = *s / n);
                let mom = F::lit(BN_MOMENTUM);
                for i in 0..feats {
                    self.running_mean.data[i] = (F::one() - mom) * self.running_mean.data[i] + mom * mean[i];
                    self.running_var.data[i] = (F::one() - mom) * self.running_var.data[i] + mom * var[i];
                }
                (mean, var)
            }
            Mode::Eval => (self.running_mean.data.clone(), self.running_var.data.clone()),
        };
        let inv_std: Vec<F> = var.iter().map(|&v| F::one() / (v + eps).sqrt()).collect();
        let mut x_hat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        for r in 0..rows {
            for i in 0..feats {
                let h = (x.data[r * feats + i] - mean[i]) * inv_std[i];
                x_hat.push(h);
                y.push(self.gamma.value.data[i] * h + self.beta.value.data[i]);
            }
        }
        self.cache = Some(BnCache {
            mode,
            shape: x.shape().to_vec(),
            x_hat,
            inv_std,
        });
        let y = Tensor::from_vec(x.shape(), y)?;
        debug_assert_finite(&y, "batchnorm forward");
        Ok(y)
    }

    fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>> {
        let c = self.cache.as_ref().ok_or_else(|| no_cache("batchnorm"))?;
        let feats = self.features();
        let rows = c.x_hat.len() / feats;
        let mut sum_g = vec![F::zero(); feats];
        let mut sum_g_xhat = vec![F::zero(); feats];
        for r in 0..rows {
            for i in 0..feats {
                let gv = g.data[r * feats + i];
                sum_g[i] += gv;
                sum_g_xhat[i] += gv * c.x_hat[r * feats + i];
            }
        }
        for i in 0..feats {
            self.gamma.grad.data[i] += sum_g_xhat[i];
            self.beta.grad.data[i] += sum_g[i];
        }
        let mut dx = vec![F::zero(); rows * feats];
        match c.mode {
            Mode::Eval => {
                for r in 0..rows {
                    for i in 0..feats {
                        dx[r * feats + i] = g.data[r * feats + i] * self.gamma.value.data[i] * c.inv_std[i];
                    }
                }
            }
            Mode::Train => {
                // dx = γ·σ⁻¹/N · (N·g − Σg − x̂·Σ(g·x̂))
                let n = F::from_usize(rows).unwrap();
                for r in 0..rows {
                    for i in 0..feats {
                        let k = r * feats + i;
                        dx[k] = self.gamma.value.data[i] * c.inv_std[i] / n
                            * (n * g.data[k] - sum_g[i] - c.x_hat[k] * sum_g_xhat[i]);
                    }
                }
            }
        }
        let dx = Tensor::from_vec(&c.shape, dx)?;
        debug_assert_finite(&dx, "batchnorm backward");
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn params(&self) -> Vec<&Param<F>> {
        vec![&self.gamma, &self.beta]
    }

    fn state(&self) -> Vec<(&'static str, &Tensor<F>)> {
        vec![
            ("gamma", &self.gamma.value),
            ("beta", &self.beta.value),
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
        ]
    }

    fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor<F>)> {
        vec![
            ("gamma", &mut self.gamma.value),
            ("beta", &mut self.beta.value),
            ("running_mean", &mut self.running_mean),
            ("running_var", &mut self.running_var),
        ]
    }
}
