use rand_chacha::ChaCha8Rng;

use super::{expect_rank, glorot_uniform, no_cache, sigmoid, Mode, Module};
use crate::error::{Error, Result};
use crate::nn::tensor::{debug_assert_finite, gemm, Mat, MatMut, Param, Scalar, Tensor};

/// Single-layer unidirectional LSTM over `(B, T, F)` returning every hidden
/// state `(B, T, H)`. Gate blocks are ordered input, forget, cell, output in
/// the `4H` dimension; the initial state is zero.
#[derive(Debug, Clone)]
pub struct Lstm<F: Scalar> {
    /// `F × 4H`
    pub w_ih: Param<F>,
    /// `H × 4H`
    pub w_hh: Param<F>,
    /// `4H`
    pub bias: Param<F>,
    cache: Option<LstmCache<F>>,
}

#[derive(Debug, Clone)]
struct LstmCache<F> {
    input: Tensor<F>,
    /// Activated gates, `(B, T, 4H)`.
    gates: Vec<F>,
    /// Cell states, `(B, T, H)`.
    cells: Vec<F>,
    /// Hidden states, `(B, T, H)`.
    hidden: Vec<F>,
}

impl<F: Scalar> Lstm<F> {
    pub fn new(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Lstm {
            w_ih: Param::new(glorot_uniform(&[inputs, 4 * hidden], inputs, 4 * hidden, rng)),
            w_hh: Param::new(glorot_uniform(&[hidden, 4 * hidden], hidden, 4 * hidden, rng)),
            bias: Param::new(Tensor::zeros(&[4 * hidden])),
            cache: None,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.value.shape()[0]
    }

    pub fn inputs(&self) -> usize {
        self.w_ih.value.shape()[0]
    }

    pub fn cast<G: Scalar>(&self) -> Lstm<G> {
        Lstm {
            w_ih: self.w_ih.cast(),
            w_hh: self.w_hh.cast(),
            bias: self.bias.cast(),
            cache: None,
        }
    }
}

impl<F: Scalar> Module<F> for Lstm<F> {
    fn forward(&mut self, x: &Tensor<F>, _mode: Mode) -> Result<Tensor<F>> {
        expect_rank(x, 3, "lstm")?;
        let (b, t, f) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        if f != self.inputs() {
            return Err(Error::Shape(format!(
                "lstm expects {} features per step, got {:?}",
                self.inputs(),
                x.shape()
            )));
        }
        let h = self.hidden();
        let g4 = 4 * h;

        // z = x·W_ih + b for every step at once, then the recurrent term per step.
        let mut z = Vec::with_capacity(b * t * g4);
        for _ in 0..b * t {
            z.extend_from_slice(&self.bias.value.data);
        }
        gemm(
            Mat::new(&x.data, b * t, f),
            Mat::new(&self.w_ih.value.data, f, g4),
            F::one(),
            MatMut::new(&mut z, b * t, g4),
        );

        let mut cells = vec![F::zero(); b * t * h];
        let mut hidden = vec![F::zero(); b * t * h];
        for step in 0..t {
            if step > 0 {
                let prev = Mat {
                    data: &hidden[(step - 1) * h..],
                    rows: b,
                    cols: h,
                    rs: t * h,
                    cs: 1,
                };
                gemm(
                    prev,
                    Mat::new(&self.w_hh.value.data, h, g4),
                    F::one(),
                    MatMut {
                        data: &mut z[step * g4..],
                        rows: b,
                        cols: g4,
                        rs: t * g4,
                        cs: 1,
                    },
                );
            }
            for bi in 0..b {
                let zr = (bi * t + step) * g4;
                let hr = (bi * t + step) * h;
                for j in 0..h {
                    let i_g = sigmoid(z[zr + j]);
                    let f_g = sigmoid(z[zr + h + j]);
                    let c_g = z[zr + 2 * h + j].tanh();
                    let o_g = sigmoid(z[zr + 3 * h + j]);
                    z[zr + j] = i_g;
                    z[zr + h + j] = f_g;
                    z[zr + 2 * h + j] = c_g;
                    z[zr + 3 * h + j] = o_g;
                    let c_prev = if step > 0 { cells[hr - h + j] } else { F::zero() };
                    let c = f_g * c_prev + i_g * c_g;
                    cells[hr + j] = c;
                    hidden[hr + j] = o_g * c.tanh();
                }
            }
        }
        let y = Tensor::from_vec(&[b, t, h], hidden.clone())?;
        debug_assert_finite(&y, "lstm forward");
        self.cache = Some(LstmCache {
            input: x.clone(),
            gates: z,
            cells,
            hidden,
        });
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<F>) -> Result<Tensor<F>> {
        let c = self.cache.as_ref().ok_or_else(|| no_cache("lstm"))?;
        let x = &c.input;
        let (b, t, f) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let h = self.hidden();
        let g4 = 4 * h;
        if grad.len() != b * t * h {
            return Err(Error::Shape(format!("lstm backward got gradient {:?}", grad.shape())));
        }

        let mut dz = vec![F::zero(); b * t * g4];
        let mut dh_next = vec![F::zero(); b * h];
        let mut dc_next = vec![F::zero(); b * h];
        for step in (0..t).rev() {
            for bi in 0..b {
                let zr = (bi * t + step) * g4;
                let hr = (bi * t + step) * h;
                for j in 0..h {
                    let (i_g, f_g, c_g, o_g) = (
                        c.gates[zr + j],
                        c.gates[zr + h + j],
                        c.gates[zr + 2 * h + j],
                        c.gates[zr + 3 * h + j],
                    );
                    let tc = c.cells[hr + j].tanh();
                    let c_prev = if step > 0 { c.cells[hr - h + j] } else { F::zero() };
                    let dh = grad.data[hr + j] + dh_next[bi * h + j];
                    let d_o = dh * tc;
                    let dc = dc_next[bi * h + j] + dh * o_g * (F::one() - tc * tc);
                    let d_i = dc * c_g;
                    let d_c = dc * i_g;
                    let d_f = dc * c_prev;
                    dc_next[bi * h + j] = dc * f_g;
                    dz[zr + j] = d_i * i_g * (F::one() - i_g);
                    dz[zr + h + j] = d_f * f_g * (F::one() - f_g);
                    dz[zr + 2 * h + j] = d_c * (F::one() - c_g * c_g);
                    dz[zr + 3 * h + j] = d_o * o_g * (F::one() - o_g);
                }
            }
            let dz_step = Mat {
                data: &dz[step * g4..],
                rows: b,
                cols: g4,
                rs: t * g4,
                cs: 1,
            };
            // dh_{t-1} = dz_t · W_hhᵀ
            gemm(
                dz_step,
                Mat::new(&self.w_hh.value.data, h, g4).t(),
                F::zero(),
                MatMut::new(&mut dh_next, b, h),
            );
            if step > 0 {
                // dW_hh += h_{t-1}ᵀ · dz_t
                let prev = Mat {
                    data: &c.hidden[(step - 1) * h..],
                    rows: b,
                    cols: h,
                    rs: t * h,
                    cs: 1,
                };
                gemm(prev.t(), dz_step, F::one(), MatMut::new(&mut self.w_hh.grad.data, h, g4));
            }
        }

        gemm(
            Mat::new(&x.data, b * t, f).t(),
            Mat::new(&dz, b * t, g4),
            F::one(),
            MatMut::new(&mut self.w_ih.grad.data, f, g4),
        );
        for row in dz.chunks(g4) {
            for (bg, &d) in self.bias.grad.data.iter_mut().zip(row) {
                *bg += d;
            }
        }
        let mut dx = vec![F::zero(); b * t * f];
        gemm(
            Mat::new(&dz, b * t, g4),
            Mat::new(&self.w_ih.value.data, f, g4).t(),
            F::zero(),
            MatMut::new(&mut dx, b * t, f),
        );
        let dx = Tensor::from_vec(x.shape(), dx)?;
        debug_assert_finite(&dx, "lstm backward");
        Ok(dx)
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }

    fn params(&self) -> Vec<&Param<F>> {
        vec![&self.w_ih, &self.w_hh, &self.bias]
    }

    fn state(&self) -> Vec<(&'static str, &Tensor<F>)> {
        vec![
            ("w_ih", &self.w_ih.value),
            ("w_hh", &self.w_hh.value),
            ("bias", &self.bias.value),
        ]
    }

    fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor<F>)> {
        vec![
            ("w_ih", &mut self.w_ih.value),
            ("w_hh", &mut self.w_hh.value),
            ("bias", &mut self.bias.value),
        ]
    }
}
