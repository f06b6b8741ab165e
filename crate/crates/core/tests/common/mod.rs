//! Shared oracles for the integration tests: central-difference gradient
//! checks at 64-bit precision.
#![allow(dead_code)]

use pktwin::nn::layers::{Mode, Module};
use pktwin::nn::loss::{compute_loss, LossConfig};
use pktwin::nn::tensor::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;

/// Magnitude below which differences are judged absolutely rather than
/// relatively; keeps near-zero gradients from dominating on round-off.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn random_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Objective `J = Σ r ⊙ module(x)` evaluated on a fresh clone, so stateful
/// layers (running statistics, dropout streams) see identical state each time.
fn objective<M: Module<f64> + Clone>(m: &M, x: &Tensor<f64>, r: &Tensor<f64>, mode: Mode) -> f64 {
    let mut m = m.clone();
    let y = m.forward(x, mode).unwrap();
    y.data.iter().zip(&r.data).map(|(a, b)| a * b).sum()
}

/// Largest relative error between backprop and central differences over
/// every input element and every parameter element.
pub fn check_module<M: Module<f64> + Clone>(m: &M, x: &Tensor<f64>, mode: Mode, rng: &mut ChaCha8Rng) -> f64 {
    let mut work = m.clone();
    let y = work.forward(x, mode).unwrap();
    let r = random_tensor(y.shape(), -1.0, 1.0, rng);
    let dx = work.backward(&r).unwrap();
    assert_eq!(dx.shape(), x.shape());

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data[i] += STEP;
        let mut xm = x.clone();
        xm.data[i] -= STEP;
        let num = (objective(m, &xp, &r, mode) - objective(m, &xm, &r, mode)) / (2.0 * STEP);
        worst = worst.max(rel_err(dx.data[i], num));
    }
    let grads: Vec<Tensor<f64>> = work.params().iter().map(|p| p.grad.clone()).collect();
    for (k, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let mut plus = m.clone();
            plus.params_mut()[k].value.data[i] += STEP;
            let mut minus = m.clone();
            minus.params_mut()[k].value.data[i] -= STEP;
            let num = (objective(&plus, x, &r, mode) - objective(&minus, x, &r, mode)) / (2.0 * STEP);
            worst = worst.max(rel_err(g.data[i], num));
        }
    }
    worst
}

/// Gradient of a loss with respect to `p` against central differences.
pub fn check_loss(p: &[f64], y: &[f64], mask: &[bool], cfg: &LossConfig) -> f64 {
    let (_, grad) = compute_loss(p, y, mask, cfg).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let mut pp = p.to_vec();
        pp[i] += STEP;
        let mut pm = p.to_vec();
        pm[i] -= STEP;
        let num = (compute_loss(&pp, y, mask, cfg).unwrap().0 - compute_loss(&pm, y, mask, cfg).unwrap().0) / (2.0 * STEP);
        worst = worst.max(rel_err(grad[i], num));
    }
    worst
}
