use rand_chacha::ChaCha8Rng;

use super::{expect_rank, glorot_uniform, no_cache, Mode, Module};
use crate::error::{Error, Result};
use crate::nn::tensor::{debug_assert_finite, gemm, Mat, MatMut, Param, Scalar, Tensor};

/// 2-D convolution with stride 1 and "same" zero padding (extra padding at the
/// bottom/right for even kernels). Input `(B, C_in, H, W)`, weight
/// `(C_out, C_in, kh, kw)`. A `1 × k` kernel gives a per-row 1-D convolution.
#[derive(Debug, Clone)]
pub struct Conv2d<F: Scalar> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    input: Option<Tensor<F>>,
}

struct Geometry {
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    pad_top: usize,
    pad_left: usize,
}

impl Geometry {
    fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn hw(&self) -> usize {
        self.h * self.w
    }

    /// `cols[(c,ki,kj), (oy,ox)] = x[c, oy+ki-pt, ox+kj-pl]` (zero outside).
    fn im2col<F: Scalar>(&self, x: &[F], cols: &mut [F]) {
        let (h, w, hw) = (self.h, self.w, self.hw());
        for c in 0..self.cin {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = ((c * self.kh + ki) * self.kw + kj) * hw;
                    let dst = &mut cols[row..row + hw];
                    let (x_lo, x_hi) = self.valid_span(kj);
                    for oy in 0..h {
                        let line = &mut dst[oy * w..(oy + 1) * w];
                        let iy = oy as isize + ki as isize - self.pad_top as isize;
                        if iy < 0 || iy >= h as isize || x_lo >= x_hi {
                            line.fill(F::zero());
                            continue;
                        }
                        line[..x_lo].fill(F::zero());
                        line[x_hi..].fill(F::zero());
                        let src = (c * h + iy as usize) * w;
                        let shift = kj as isize - self.pad_left as isize;
                        let from = (x_lo as isize + shift) as usize;
                        line[x_lo..x_hi].copy_from_slice(&x[src + from..src + from + (x_hi - x_lo)]);
                    }
                }
            }
        }
    }

    fn col2im<F: Scalar>(&self, cols: &[F], dx: &mut [F]) {
        let (h, w, hw) = (self.h, self.w, self.hw());
        for c in 0..self.cin {
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = ((c * self.kh + ki) * self.kw + kj) * hw;
                    let (x_lo, x_hi) = self.valid_span(kj);
                    if x_lo >= x_hi {
                        continue;
                    }
                    let shift = kj as isize - self.pad_left as isize;
                    let from = (x_lo as isize + shift) as usize;
                    for oy in 0..h {
                        let iy = oy as isize + ki as isize - self.pad_top as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &cols[row + oy * w + x_lo..row + oy * w + x_hi];
                        let base = (c * h + iy as usize) * w + from;
                        for (d, &s) in dx[base..base + (x_hi - x_lo)].iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }

    /// Output columns `ox` whose input column `ox + kj - pad_left` is in range.
    fn valid_span(&self, kj: usize) -> (usize, usize) {
        let shift = kj as isize - self.pad_left as isize;
        let lo = (-shift).max(0) as usize;
        let hi = ((self.w as isize - shift).min(self.w as isize)).max(0) as usize;
        (lo.min(self.w), hi)
    }
}

impl<F: Scalar> Conv2d<F> {
    pub fn new(cin: usize, cout: usize, kh: usize, kw: usize, rng: &mut ChaCha8Rng) -> Self {
        Conv2d {
            weight: Param::new(glorot_uniform(&[cout, cin, kh, kw], cin * kh * kw, cout * kh * kw, rng)),
            bias: Param::new(Tensor::zeros(&[cout])),
            input: None,
        }
    }

    pub fn cast<G: Scalar>(&self) -> Conv2d<G> {
        Conv2d {
            weight: self.weight.cast(),
            bias: self.bias.cast(),
            input: None,
        }
    }

    fn geometry(&self, x: &Tensor<F>) -> Result<Geometry> {
        expect_rank(x, 4, "conv2d")?;
        let ws = self.weight.value.shape();
        let (cin, kh, kw) = (ws[1], ws[2], ws[3]);
        if x.shape()[1] != cin {
            return Err(Error::Shape(format!(
                "conv2d expects {cin} input channels, got {:?}",
                x.shape()
            )));
        }
        Ok(Geometry {
            cin,
            h: x.shape()[2],
            w: x.shape()[3],
            kh,
            kw,
            pad_top: (kh - 1) / 2,
            pad_left: (kw - 1) / 2,
        })
    }

    fn cout(&self) -> usize {
        self.weight.value.shape()[0]
    }
}

impl<F: Scalar> Module<F> for Conv2d<F> {
    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> Result<Tensor<F>> {
        let g = self.geometry(x)?;
        let batch = x.shape()[0];
        let (k, hw, cout) = (g.k(), g.hw(), self.cout());
        let mut out = vec![F::zero(); batch * cout * hw];
        let mut cols = vec![F::zero(); k * hw];
        for b in 0..batch {
            g.im2col(&x.data[b * g.cin * hw..(b + 1) * g.cin * hw], &mut cols);
            let dst = &mut out[b * cout * hw..(b + 1) * cout * hw];
            for (o, chunk) in dst.chunks_mut(hw).enumerate() {
                chunk.fill(self.bias.value.data[o]);
            }
            gemm(
                Mat::new(&self.weight.value.data, cout, k),
                Mat::new(&cols, k, hw),
                F::one(),
                MatMut::new(dst, cout, hw),
            );
        }
        self.input = Some(x.clone());
        let y = Tensor::from_vec(&[batch, cout, g.h, g.w], out)?;
        debug_assert_finite(&y, "conv2d forward");
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<F>) -> Result<Tensor<F>> {
        let x = self.input.as_ref().ok_or_else(|| no_cache("conv2d"))?;
        let g = self.geometry(x)?;
        let batch = x.shape()[0];
        let (k, hw, cout) = (g.k(), g.hw(), self.cout());
        if grad.len() != batch * cout * hw {
            return Err(Error::Shape(format!("conv2d backward got gradient {:?}", grad.shape())));
        }
        let mut dx = vec![F::zero(); x.len()];
        let mut cols = vec![F::zero(); k * hw];
        let mut dcols = vec![F::zero(); k * hw];
        for b in 0..batch {
            let gb = &grad.data[b * cout * hw..(b + 1) * cout * hw];
            g.im2col(&x.data[b * g.cin * hw..(b + 1) * g.cin * hw], &mut cols);
            gemm(
                Mat::new(gb, cout, hw),
                Mat::new(&cols, k, hw).t(),
                F::one(),
                MatMut::new(&mut self.weight.grad.data, cout, k),
            );
            for (o, chunk) in gb.chunks(hw).enumerate() {
                self.bias.grad.data[o] += chunk.iter().copied().sum::<F>();
            }
            gemm(
                Mat::new(&self.weight.value.data, cout, k).t(),
                Mat::new(gb, cout, hw),
                F::zero(),
                MatMut::new(&mut dcols, k, hw),
            );
            g.col2im(&dcols, &mut dx[b * g.cin * hw..(b + 1) * g.cin * hw]);
        }
        let dx = Tensor::from_vec(x.shape(), dx)?;
        debug_assert_finite(&dx, "conv2d backward");
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

/// `(B, C, R, W)` → `(B, R, C·W)`: gathers each row's channel maps into one
/// feature vector so a sequence model can consume rows as time steps.
#[derive(Debug, Clone, Default)]
pub struct ChannelsToRows {
    shape: Option<Vec<usize>>,
}

impl ChannelsToRows {
    pub fn new() -> Self {
        ChannelsToRows { shape: None }
    }
}

impl<F: Scalar> Module<F> for ChannelsToRows {
    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> Result<Tensor<F>> {
        expect_rank(x, 4, "channels_to_rows")?;
        let s = x.shape();
        let (b, c, r, w) = (s[0], s[1], s[2], s[3]);
        let mut out = vec![F::zero(); x.len()];
        for bi in 0..b {
            for ci in 0..c {
                for ri in 0..r {
                    let src = ((bi * c + ci) * r + ri) * w;
                    let dst = ((bi * r + ri) * c + ci) * w;
                    out[dst..dst + w].copy_from_slice(&x.data[src..src + w]);
                }
            }
        }
        self.shape = Some(s.to_vec());
        Tensor::from_vec(&[b, r, c * w], out)
    }

    fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>> {
        let s = self.shape.as_ref().ok_or_else(|| no_cache("channels_to_rows"))?;
        let (b, c, r, w) = (s[0], s[1], s[2], s[3]);
        let mut out = vec![F::zero(); g.len()];
        for bi in 0..b {
            for ci in 0..c {
                for ri in 0..r {
                    let src = ((bi * r + ri) * c + ci) * w;
                    let dst = ((bi * c + ci) * r + ri) * w;
                    out[dst..dst + w].copy_from_slice(&g.data[src..src + w]);
                }
            }
        }
        Tensor::from_vec(s, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct 4-loop convolution.
    fn naive(x: &Tensor<f64>, w: &Tensor<f64>, b: &[f64]) -> Vec<f64> {
        let (bs, cin, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (cout, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
        let (pt, pl) = ((kh - 1) / 2, (kw - 1) / 2);
        let mut out = vec![0.0; bs * cout * h * wd];
        for n in 0..bs {
            for o in 0..cout {
                for y in 0..h {
                    for xx in 0..wd {
                        let mut s = b[o];
                        for c in 0..cin {
                            for i in 0..kh {
                                for j in 0..kw {
                                    let iy = y as isize + i as isize - pt as isize;
                                    let ix = xx as isize + j as isize - pl as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                        s += w.data[((o * cin + c) * kh + i) * kw + j]
                                            * x.data[((n * cin + c) * h + iy as usize) * wd + ix as usize];
                                    }
                                }
                            }
                        }
                        out[((n * cout + o) * h + y) * wd + xx] = s;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn im2col_conv_matches_direct_loops() {
        let mut rng = super::super::layer_rng(3, 0);
        for (kh, kw) in [(3, 3), (1, 3), (4, 2), (7, 7)] {
            let mut conv = Conv2d::<f64>::new(2, 3, kh, kw, &mut rng);
            conv.bias.value.data = vec![0.1, -0.2, 0.3];
            let x = glorot_uniform::<f64>(&[2, 2, 5, 6], 1, 1, &mut rng);
            let y = conv.forward(&x, Mode::Eval).unwrap();
            let expect = naive(&x, &conv.weight.value, &conv.bias.value.data);
            for (a, b) in y.data.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12, "kernel {kh}x{kw}");
            }
        }
    }

    #[test]
    fn channels_to_rows_layout() {
        let x = Tensor::<f64>::from_vec(&[1, 2, 2, 3], (0..12).map(f64::from).collect()).unwrap();
        let mut l = ChannelsToRows::new();
        let y = Module::<f64>::forward(&mut l, &x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[1, 2, 6]);
        assert_eq!(y.data, vec![0., 1., 2., 6., 7., 8., 3., 4., 5., 9., 10., 11.]);
        let back = Module::<f64>::backward(&mut l, &y).unwrap();
        assert_eq!(back, x);
    }
}
