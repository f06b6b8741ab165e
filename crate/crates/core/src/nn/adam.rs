use super::tensor::{Param, Scalar, Tensor};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moments for an ordered parameter list.
#[derive(Debug, Clone)]
pub struct AdamState<F: Scalar> {
    pub m: Vec<Tensor<F>>,
    pub v: Vec<Tensor<F>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &[&Param<F>]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.value.shape())).collect(),
            t: 0,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
        }
    }

    /// One update of every parameter from its accumulated gradient.
    pub fn step(&mut self, params: &mut [&mut Param<F>], lr: f64) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state tracks {} tensors, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (F::lit(self.beta1), F::lit(self.beta2));
        let one = F::one();
        let c1 = F::lit(1.0 - self.beta1.powi(t));
        let c2 = F::lit(1.0 - self.beta2.powi(t));
        let lr = F::lit(lr);
        let eps = F::lit(self.epsilon);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            if p.value.shape() != m.shape() {
                return Err(Error::Shape(format!(
                    "adam moment {:?} does not match parameter {:?}",
                    m.shape(),
                    p.value.shape()
                )));
            }
            for i in 0..p.value.data.len() {
                let g = p.grad.data[i];
                m.data[i] = b1 * m.data[i] + (one - b1) * g;
                v.data[i] = b2 * v.data[i] + (one - b2) * g * g;
                let m_hat = m.data[i] / c1;
                let v_hat = v.data[i] / c2;
                p.value.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
