use std::path::Path;

use clap::ValueEnum;
use serde::Deserialize;

use crate::error::CliError;

pub const SEED_ENV: &str = "PKTWIN_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Labeling {
    Forward,
    Both,
}

impl Labeling {
    pub fn scheme(self) -> pktwin::flow::LabelingScheme {
        match self {
            Labeling::Forward => pktwin::flow::LabelingScheme::ForwardOnly,
            Labeling::Both => pktwin::flow::LabelingScheme::BothSides,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Labeling::Forward => "forward",
            Labeling::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelArg {
    Fcnn,
    Cnn,
    Cnnlstm,
}

impl From<ModelArg> for pktwin::nn::ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Fcnn => pktwin::nn::ModelKind::Fcnn,
            ModelArg::Cnn => pktwin::nn::ModelKind::Cnn,
            ModelArg::Cnnlstm => pktwin::nn::ModelKind::CnnLstm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossArg {
    Bce,
    Focal,
    Dice,
    Iou,
}

impl From<LossArg> for pktwin::nn::LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Bce => pktwin::nn::LossKind::Bce,
            LossArg::Focal => pktwin::nn::LossKind::Focal,
            LossArg::Dice => pktwin::nn::LossKind::Dice,
            LossArg::Iou => pktwin::nn::LossKind::Iou,
        }
    }
}

/// Optional TOML run configuration. Every key is optional; command-line
/// flags override it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub labeling: Option<Labeling>,
    pub balance: Option<Switch>,
    pub model: Option<ModelArg>,
    pub loss: Option<LossArg>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub groups: Option<usize>,
    pub timeout_us: Option<u64>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = crate::error::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    /// Flag, then config file, then the environment, then the default.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        if let Some(s) = flag.or(self.seed) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not an unsigned 64-bit integer"))),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }
}
