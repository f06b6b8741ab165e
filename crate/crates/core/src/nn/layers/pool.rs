use super::{expect_rank, no_cache, Mode, Module};
use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Non-overlapping max pooling over `(B, C, H, W)` with window `ph × pw`;
/// trailing rows/columns that do not fill a window are dropped. Gradients go
/// to the first maximal element of each window.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub ph: usize,
    pub pw: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new(ph: usize, pw: usize) -> Self {
        MaxPool2d { ph, pw, cache: None }
    }

    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (h / self.ph, w / self.pw)
    }
}

impl<F: Scalar> Module<F> for MaxPool2d {
    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> Result<Tensor<F>> {
        expect_rank(x, 4, "maxpool2d")?;
        let s = x.shape();
        let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
        let (oh, ow) = self.output_dims(h, w);
        if oh == 0 || ow == 0 {
            return Err(Error::Shape(format!(
                "maxpool {}x{} does not fit input {s:?}",
                self.ph, self.pw
            )));
        }
        let mut out = Vec::with_capacity(b * c * oh * ow);
        let mut argmax = Vec::with_capacity(b * c * oh * ow);
        for plane in 0..b * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * self.ph * w + ox * self.pw;
                    for i in 0..self.ph {
                        for j in 0..self.pw {
                            let idx = base + (oy * self.ph + i) * w + ox * self.pw + j;
                            if x.data[idx] > x.data[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(x.data[best]);
                    argmax.push(best);
                }
            }
        }
        self.cache = Some((s.to_vec(), argmax));
        Tensor::from_vec(&[b, c, oh, ow], out)
    }

    fn backward(&mut self, g: &Tensor<F>) -> Result<Tensor<F>> {
        let (shape, argmax) = self.cache.as_ref().ok_or_else(|| no_cache("maxpool2d"))?;
        if g.len() != argmax.len() {
            return Err(Error::Shape(format!("maxpool backward got gradient {:?}", g.shape())));
        }
        let mut dx = Tensor::zeros(shape);
        for (&i, &gv) in argmax.iter().zip(&g.data) {
            dx.data[i] += gv;
        }
        Ok(dx)
    }
}
