use std::io::Write;

use crate::error::{Error, Result};
use crate::nn::layers::Mode;
use crate::nn::model::Model;
use crate::nn::tensor::{Scalar, Tensor};

/// A differentiable scorer over `(B, rows, cols)` inputs producing `(B, K)`
/// output scores.
pub trait Differentiable<F: Scalar> {
    fn forward_scores(&mut self, x: &Tensor<F>) -> Result<Tensor<F>>;

    /// Input gradient for the output gradient `g`, after `forward_scores`.
    fn input_gradient(&mut self, g: &Tensor<F>) -> Result<Tensor<F>>;
}

impl<F: Scalar> Differentiable<F> for Model<F> {
    fn forward_scores(&mut self, x: &Tensor<F>) -> Result<Tensor<F>> {
        self.forward(x, Mode::Eval)
    }

    fn input_gradient(&mut self, g: &Tensor<F>) -> Result<Tensor<F>> {
        let dx = self.backward(g);
        self.zero_grad();
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, non-negative.
    pub values: Vec<f64>,
    pub batch_size: usize,
}

/// `S = |mean_k d max(y_k) / d x_k|`: the gradient of each window's highest
/// output score, averaged over the batch, absolute value taken last.
pub fn saliency<F: Scalar, M: Differentiable<F>>(model: &mut M, batch: &Tensor<F>) -> Result<SaliencyMap> {
    let s = batch.shape();
    if s.len() != 3 || s[0] == 0 {
        return Err(Error::Shape(format!("saliency expects (batch, rows, cols), got {s:?}")));
    }
    let (b, rows, cols) = (s[0], s[1], s[2]);
    let y = model.forward_scores(batch)?;
    if y.shape().first() != Some(&b) || y.is_empty() {
        return Err(Error::Shape(format!("model returned scores of shape {:?}", y.shape())));
    }
    let k = y.len() / b;
    let mut g = Tensor::zeros(y.shape());
    for (bi, scores) in y.data.chunks(k).enumerate() {
        let mut best = 0;
        for (j, &v) in scores.iter().enumerate() {
            if v > scores[best] {
                best = j;
            }
        }
        g.data[bi * k + best] = F::one();
    }
    let dx = model.input_gradient(&g)?;
    if dx.len() != batch.len() {
        return Err(Error::Shape(format!("input gradient has shape {:?}", dx.shape())));
    }
    let plane = rows * cols;
    let mut values = vec![0.0; plane];
    for window in dx.data.chunks(plane) {
        for (acc, &v) in values.iter_mut().zip(window) {
            *acc += v.to_f64().unwrap();
        }
    }
    for v in &mut values {
        *v = (*v / b as f64).abs();
    }
    Ok(SaliencyMap {
        rows,
        cols,
        values,
        batch_size: b,
    })
}

impl SaliencyMap {
    /// Binary PGM (P5), `cols × rows` pixels, min-max scaled to 0..=255.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.cols, self.rows)?;
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        let pixels: Vec<u8> = self
            .values
            .iter()
            .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
            .collect();
        out.write_all(&pixels)?;
        Ok(())
    }

    /// Raw values, one CSV line per row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for row in self.values.chunks(self.cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}
