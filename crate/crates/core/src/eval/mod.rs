//! Confusion matrices, accuracy/precision/recall, and gradient saliency.

mod saliency;

pub use saliency::*;

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Tallies valid entries; `p >= threshold` predicts the attack class.
pub fn confusion<F: Into<f64> + Copy>(p: &[F], y: &[u8], mask: &[bool], threshold: f64) -> Result<ConfusionMatrix> {
    if p.len() != y.len() || p.len() != mask.len() {
        return Err(Error::Shape(format!(
            "confusion inputs differ in length: p {}, y {}, mask {}",
            p.len(),
            y.len(),
            mask.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for i in (0..p.len()).filter(|&i| mask[i]) {
        cm.add(p[i].into() >= threshold, y[i] == 1);
    }
    Ok(cm)
}

/// Precision and recall are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("metrics of an empty confusion matrix".into()));
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Ok(Metrics {
        accuracy: (cm.tp + cm.tn) as f64 / total as f64,
        precision: ratio(cm.tp, cm.tp + cm.fp),
        recall: ratio(cm.tp, cm.tp + cm.fn_),
    })
}
