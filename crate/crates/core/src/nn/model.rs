use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::layers::{
    layer_rng, BatchNorm, ChannelsToRows, Conv2d, Dense, Dropout, Layer, Lstm, MaxPool2d, Mode, Module, Relu,
    Reshape, Sigmoid,
};
use super::tensor::{Param, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::window::{VECTOR_WIDTH, WINDOW_ROWS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fcnn,
    Cnn,
    CnnLstm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Fcnn => "fcnn",
            ModelKind::Cnn => "cnn",
            ModelKind::CnnLstm => "cnnlstm",
        }
    }

    /// Whether the model sees whole windows rather than independent packets.
    pub fn is_windowed(self) -> bool {
        self != ModelKind::Fcnn
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fcnn" => Ok(ModelKind::Fcnn),
            "cnn" => Ok(ModelKind::Cnn),
            "cnnlstm" | "cnn_lstm" | "cnn-lstm" => Ok(ModelKind::CnnLstm),
            other => Err(Error::InvalidArgument(format!(
                "unknown model '{other}' (expected fcnn, cnn or cnnlstm)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Rows per window; every model emits one score per row.
    pub input_rows: usize,
    /// Bytes per row.
    pub input_cols: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    pub fcnn_hidden: Vec<usize>,
    pub cnn_channels: Vec<usize>,
    pub cnn_kernels: Vec<usize>,
    pub conv1d_filters: usize,
    pub conv1d_kernel: usize,
    pub lstm_hidden: usize,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        let (learning_rate, batch_size) = match kind {
            ModelKind::Fcnn => (0.001, 8096),
            ModelKind::Cnn => (0.001, 64),
            ModelKind::CnnLstm => (0.0005, 64),
        };
        ModelConfig {
            kind,
            input_rows: WINDOW_ROWS,
            input_cols: VECTOR_WIDTH,
            learning_rate,
            batch_size,
            dropout_rate: 0.2,
            seed,
            fcnn_hidden: vec![256, 356, 32],
            cnn_channels: vec![8, 16, 32],
            cnn_kernels: vec![9, 7, 7],
            conv1d_filters: 6,
            conv1d_kernel: 3,
            lstm_hidden: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.input_rows == 0 || self.input_cols == 0 {
            return bad(format!("input shape {}x{} is empty", self.input_rows, self.input_cols));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        match self.kind {
            ModelKind::Fcnn => {
                if self.fcnn_hidden.len() < 2 || self.fcnn_hidden.contains(&0) {
                    return bad("fcnn needs at least two nonzero hidden sizes".into());
                }
            }
            ModelKind::Cnn => {
                if self.cnn_channels.is_empty()
                    || self.cnn_channels.len() != self.cnn_kernels.len()
                    || self.cnn_channels.contains(&0)
                    || self.cnn_kernels.contains(&0)
                {
                    return bad("cnn needs matching nonzero channel and kernel lists".into());
                }
                let (h, w) = self.cnn_feature_dims();
                if h == 0 || w == 0 {
                    return bad(format!(
                        "input {}x{} is too small for {} pooling stages",
                        self.input_rows,
                        self.input_cols,
                        self.cnn_channels.len()
                    ));
                }
            }
            ModelKind::CnnLstm => {
                if self.conv1d_filters == 0 || self.conv1d_kernel == 0 || self.lstm_hidden == 0 {
                    return bad("cnn_lstm sizes must be nonzero".into());
                }
                if self.input_cols < 2 {
                    return bad("cnn_lstm needs at least two columns to pool".into());
                }
            }
        }
        Ok(())
    }

    fn cnn_feature_dims(&self) -> (usize, usize) {
        let n = self.cnn_channels.len() as u32;
        (self.input_rows >> n, self.input_cols >> n)
    }
}

/// A sequential network mapping `(B, rows, cols)` inputs in `[0, 1]` to
/// `(B, rows)` probabilities.
#[derive(Debug, Clone)]
pub struct Model<F: Scalar = f32> {
    pub config: ModelConfig,
    pub layers: Vec<Layer<F>>,
}

pub fn build_model<F: Scalar>(cfg: &ModelConfig) -> Result<Model<F>> {
    cfg.validate()?;
    let (rows, cols) = (cfg.input_rows, cfg.input_cols);
    let mut layers: Vec<Layer<F>> = Vec::new();
    let init = |i: usize| layer_rng(cfg.seed, i);
    match cfg.kind {
        ModelKind::Fcnn => {
            let h = &cfg.fcnn_hidden;
            let mut width = cols;
            for (i, &units) in h.iter().enumerate() {
                layers.push(Layer::Dense(Dense::new(width, units, &mut init(layers.len()))));
                if i < 2 {
                    layers.push(Layer::BatchNorm(BatchNorm::new(units)));
                    layers.push(Layer::Relu(Relu::new()));
                    layers.push(Layer::Dropout(Dropout::new(cfg.dropout_rate, init(layers.len()))));
                } else {
                    layers.push(Layer::Relu(Relu::new()));
                }
                width = units;
            }
            layers.push(Layer::Dense(Dense::new(width, 1, &mut init(layers.len()))));
            layers.push(Layer::Sigmoid(Sigmoid::new()));
            layers.push(Layer::Reshape(Reshape::squeeze_last()));
        }
        ModelKind::Cnn => {
            layers.push(Layer::Reshape(Reshape::new(&[1, rows, cols])));
            let mut cin = 1;
            for (&cout, &k) in cfg.cnn_channels.iter().zip(&cfg.cnn_kernels) {
                layers.push(Layer::Conv2d(Conv2d::new(cin, cout, k, k, &mut init(layers.len()))));
                layers.push(Layer::Relu(Relu::new()));
                layers.push(Layer::MaxPool2d(MaxPool2d::new(2, 2)));
                cin = cout;
            }
            let (h, w) = cfg.cnn_feature_dims();
            let flat = cin * h * w;
            layers.push(Layer::Reshape(Reshape::new(&[flat])));
            layers.push(Layer::Dense(Dense::new(flat, rows, &mut init(layers.len()))));
            layers.push(Layer::Sigmoid(Sigmoid::new()));
        }
        ModelKind::CnnLstm => {
            layers.push(Layer::Reshape(Reshape::new(&[1, rows, cols])));
            let filters = cfg.conv1d_filters;
            layers.push(Layer::Conv2d(Conv2d::new(1, filters, 1, cfg.conv1d_kernel, &mut init(layers.len()))));
            layers.push(Layer::Relu(Relu::new()));
            layers.push(Layer::MaxPool2d(MaxPool2d::new(1, 2)));
            layers.push(Layer::ChannelsToRows(ChannelsToRows::new()));
            let features = filters * (cols / 2);
            layers.push(Layer::Lstm(Lstm::new(features, cfg.lstm_hidden, &mut init(layers.len()))));
            layers.push(Layer::Dense(Dense::new(cfg.lstm_hidden, 1, &mut init(layers.len()))));
            layers.push(Layer::Sigmoid(Sigmoid::new()));
            layers.push(Layer::Reshape(Reshape::new(&[rows])));
        }
    }
    Ok(Model {
        config: cfg.clone(),
        layers,
    })
}

impl<F: Scalar> Model<F> {
    pub fn input_dims(&self) -> (usize, usize) {
        (self.config.input_rows, self.config.input_cols)
    }

    /// `x` is `(B, rows, cols)`; returns `(B, rows)` probabilities. The FCNN
    /// scores rows independently and accepts any row count.
    pub fn forward(&mut self, x: &Tensor<F>, mode: Mode) -> Result<Tensor<F>> {
        let (rows, cols) = self.input_dims();
        let s = x.shape();
        let rows_ok = s.len() == 3 && (s[1] == rows || (self.config.kind == ModelKind::Fcnn && s[1] > 0));
        if !rows_ok || s[2] != cols || s[0] == 0 {
            return Err(Error::Shape(format!(
                "{} expects input (batch, {rows}, {cols}), got {s:?}",
                self.config.kind.as_str()
            )));
        }
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, mode)?;
        }
        Ok(h)
    }

    /// Backpropagates `d objective / d output` through the last forward pass,
    /// accumulating parameter gradients; returns the input gradient.
    pub fn backward(&mut self, grad: &Tensor<F>) -> Result<Tensor<F>> {
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn params(&self) -> Vec<&Param<F>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    /// Persistent tensors under stable names such as `"0.dense.weight"`.
    pub fn named_state(&self) -> Vec<(String, &Tensor<F>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            for (name, t) in l.state() {
                out.push((format!("{i}.{}.{name}", l.name()), t));
            }
        }
        out
    }

    pub fn named_state_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            let lname = l.name();
            for (name, t) in l.state_mut() {
                out.push((format!("{i}.{lname}.{name}"), t));
            }
        }
        out
    }

    pub fn snapshot(&self) -> Vec<Tensor<F>> {
        self.named_state().into_iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor<F>]) -> Result<()> {
        let mut state = self.named_state_mut();
        if state.len() != snapshot.len() {
            return Err(Error::Invariant("snapshot does not match model layout".into()));
        }
        for ((name, t), s) in state.iter_mut().zip(snapshot) {
            if t.shape() != s.shape() {
                return Err(Error::Shape(format!("snapshot tensor {name} has shape {:?}", s.shape())));
            }
            t.data.copy_from_slice(&s.data);
        }
        Ok(())
    }

    pub fn cast<G: Scalar>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            layers: self.layers.iter().map(|l| l.cast()).collect(),
        }
    }
}
