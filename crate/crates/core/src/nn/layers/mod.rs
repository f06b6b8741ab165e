//! Layers with explicit forward passes and reverse-mode backward passes.
//!
//! `forward` caches whatever `backward` needs; `backward` takes the gradient
//! of the objective with respect to the layer output, accumulates parameter
//! gradients, and returns the gradient with respect to the layer input.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod lstm;
mod pool;
mod reshape;

pub use activation::*;
pub use batchnorm::*;
pub use conv::*;
pub use dense::*;
pub use dropout::*;
pub use lstm::*;
pub use pool::*;
pub use reshape::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tensor::{Param, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub trait Module<F: Scalar> {
    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>>;

    fn backward(&mut self, grad_out: &Tensor<F>) -> Result<Tensor<F>>;

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        Vec::new()
    }

    fn params(&self) -> Vec<&Param<F>> {
        Vec::new()
    }

    /// Persistent tensors (parameters and running statistics) by name.
    fn state(&self) -> Vec<(&'static str, &Tensor<F>)> {
        Vec::new()
    }

    fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor<F>)> {
        Vec::new()
    }
}

pub(crate) fn expect_rank<F: Scalar>(x: &Tensor<F>, rank: usize, layer: &str) -> Result<()> {
    if x.shape().len() != rank {
        return Err(Error::Shape(format!(
            "{layer} expects a rank-{rank} input, got {:?}",
            x.shape()
        )));
    }
    Ok(())
}

pub(crate) fn no_cache(layer: &str) -> Error {
    Error::Invariant(format!("{layer}: backward called before forward"))
}

/// Glorot/Xavier uniform initialization: U(-l, l), l = sqrt(6 / (fan_in + fan_out)).
pub fn glorot_uniform<F: Scalar>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor<F> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| F::lit(rng.gen_range(-limit..limit))).collect();
    Tensor::from_vec(shape, data).unwrap()
}

pub fn layer_rng(seed: u64, layer: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64 + 1);
    rng
}

/// Every layer type the architectures use.
#[derive(Debug, Clone)]
pub enum Layer<F: Scalar> {
    Dense(Dense<F>),
    BatchNorm(BatchNorm<F>),
    Dropout(Dropout),
    Relu(Relu<F>),
    Sigmoid(Sigmoid<F>),
    Conv2d(Conv2d<F>),
    MaxPool2d(MaxPool2d),
    ChannelsToRows(ChannelsToRows),
    Lstm(Lstm<F>),
    Reshape(Reshape),
}

macro_rules! dispatch {
    ($self:expr, $l:ident => $e:expr) => {
        match $self {
            Layer::Dense($l) => $e,
            Layer::BatchNorm($l) => $e,
            Layer::Dropout($l) => $e,
            Layer::Relu($l) => $e,
            Layer::Sigmoid($l) => $e,
            Layer::Conv2d($l) => $e,
            Layer::MaxPool2d($l) => $e,
            Layer::ChannelsToRows($l) => $e,
            Layer::Lstm($l) => $e,
            Layer::Reshape($l) => $e,
        }
    };
}

impl<F: Scalar> Module<F> for Layer<F> {
    fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        dispatch!(self, l => Module::<F>::forward(l, x, mode))
    }

    fn backward(&mut self, grad_out: &Tensor<F>) -> Result<Tensor<F>> {
        dispatch!(self, l => Module::<F>::backward(l, grad_out))
    }

    fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        dispatch!(self, l => Module::<F>::params_mut(l))
    }

    fn params(&self) -> Vec<&Param<F>> {
        dispatch!(self, l => Module::<F>::params(l))
    }

    fn state(&self) -> Vec<(&'static str, &Tensor<F>)> {
        dispatch!(self, l => Module::<F>::state(l))
    }

    fn state_mut(&mut self) -> Vec<(&'static str, &mut Tensor<F>)> {
        dispatch!(self, l => Module::<F>::state_mut(l))
    }
}

impl<F: Scalar> Layer<F> {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Dropout(_) => "dropout",
            Layer::Relu(_) => "relu",
            Layer::Sigmoid(_) => "sigmoid",
            Layer::Conv2d(_) => "conv2d",
            Layer::MaxPool2d(_) => "maxpool2d",
            Layer::ChannelsToRows(_) => "channels_to_rows",
            Layer::Lstm(_) => "lstm",
            Layer::Reshape(_) => "reshape",
        }
    }

    /// Converts parameters and statistics to another precision; caches are dropped.
    pub fn cast<G: Scalar>(&self) -> Layer<G> {
        match self {
            Layer::Dense(l) => Layer::Dense(l.cast()),
            Layer::BatchNorm(l) => Layer::BatchNorm(l.cast()),
            Layer::Dropout(l) => Layer::Dropout(l.clone()),
            Layer::Relu(_) => Layer::Relu(Relu::new()),
            Layer::Sigmoid(_) => Layer::Sigmoid(Sigmoid::new()),
            Layer::Conv2d(l) => Layer::Conv2d(l.cast()),
            Layer::MaxPool2d(l) => Layer::MaxPool2d(l.clone()),
            Layer::ChannelsToRows(l) => Layer::ChannelsToRows(l.clone()),
            Layer::Lstm(l) => Layer::Lstm(l.cast()),
            Layer::Reshape(l) => Layer::Reshape(l.clone()),
        }
    }
}
