use std::io::Write;

use serde::Serialize;

use super::adam::AdamState;
use super::layers::Mode;
use super::loss::{compute_loss, LossConfig};
use super::model::Model;
use super::tensor::Tensor;
use crate::dataset::{DatasetPartition, DatasetRng};
use crate::error::{Error, Result};
use crate::eval::{confusion, metrics, ConfusionMatrix, Metrics, DEFAULT_THRESHOLD};
use crate::window::{PacketVector, VECTOR_WIDTH};

/// Model inputs cut from a partition: single packets for the FCNN, windows of
/// `rows_per_unit` consecutive rows (padded at the end) otherwise.
#[derive(Debug, Clone)]
pub struct Samples {
    pub rows_per_unit: usize,
    pub rows: Vec<PacketVector>,
}

impl Samples {
    pub fn from_partition(part: &DatasetPartition, windowed: bool, rows_per_unit: usize) -> Self {
        if !windowed {
            return Samples {
                rows_per_unit: 1,
                rows: part.vectors.iter().filter(|v| v.valid).cloned().collect(),
            };
        }
        let mut rows = part.vectors.clone();
        let rem = rows.len() % rows_per_unit;
        if rem != 0 {
            rows.resize(rows.len() + rows_per_unit - rem, PacketVector::padding());
        }
        Samples { rows_per_unit, rows }
    }

    pub fn units(&self) -> usize {
        self.rows.len() / self.rows_per_unit
    }

    /// Inputs scaled to `[0, 1]`, targets and validity mask for the given units.
    pub fn batch(&self, units: &[usize]) -> (Tensor<f32>, Vec<f32>, Vec<bool>) {
        let r = self.rows_per_unit;
        let mut x = Vec::with_capacity(units.len() * r * VECTOR_WIDTH);
        let mut y = Vec::with_capacity(units.len() * r);
        let mut mask = Vec::with_capacity(units.len() * r);
        for &u in units {
            for row in &self.rows[u * r..(u + 1) * r] {
                x.extend(row.bytes.iter().map(|&b| b as f32 / 255.0));
                y.push(row.label as f32);
                mask.push(row.valid);
            }
        }
        let x = Tensor::from_vec(&[units.len(), r, VECTOR_WIDTH], x).expect("batch shape");
        (x, y, mask)
    }
}

/// Probabilities for every row of `samples`, in order.
pub fn predict(model: &mut Model<f32>, samples: &Samples, chunk: usize) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(samples.rows.len());
    let all: Vec<usize> = (0..samples.units()).collect();
    for units in all.chunks(chunk.max(1)) {
        let (x, _, _) = samples.batch(units);
        out.extend(model.forward(&x, Mode::Eval)?.data);
    }
    Ok(out)
}

/// Confusion matrix over the valid rows of a partition.
pub fn evaluate_partition(model: &mut Model<f32>, part: &DatasetPartition) -> Result<ConfusionMatrix> {
    let samples = Samples::from_partition(part, model.config.kind.is_windowed(), model.config.input_rows);
    let chunk = if samples.rows_per_unit == 1 { 4096 } else { 16 };
    let p = predict(model, &samples, chunk)?;
    let y: Vec<u8> = samples.rows.iter().map(|r| r.label).collect();
    let mask: Vec<bool> = samples.rows.iter().map(|r| r.valid).collect();
    confusion(&p, &y, &mask, DEFAULT_THRESHOLD)
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub loss: LossConfig,
    /// Replaces the configured batch size when set.
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl TrainOptions {
    pub fn new(epochs: usize, loss: LossConfig) -> Self {
        TrainOptions {
            epochs,
            loss,
            batch_size: None,
            learning_rate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters the model holds on return; `None` for zero epochs.
    pub best_epoch: Option<usize>,
}

/// Keeps the first epoch reaching the highest validation accuracy.
#[derive(Debug, Clone, Default)]
pub struct BestTracker {
    best: Option<(usize, f64)>,
}

impl BestTracker {
    /// Returns true when `accuracy` beats every earlier epoch.
    pub fn observe(&mut self, epoch: usize, accuracy: f64) -> bool {
        match self.best {
            Some((_, best)) if accuracy <= best => false,
            _ => {
                self.best = Some((epoch, accuracy));
                true
            }
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

/// Trains with Adam on seeded-shuffled batches and leaves the model at the
/// epoch with the best validation accuracy.
pub fn train(
    model: &mut Model<f32>,
    train: &DatasetPartition,
    val: &DatasetPartition,
    opts: &TrainOptions,
) -> Result<TrainOutcome> {
    let cfg = model.config.clone();
    if cfg.input_cols != VECTOR_WIDTH {
        return Err(Error::InvalidArgument(format!(
            "model expects {} columns, partitions hold {VECTOR_WIDTH}",
            cfg.input_cols
        )));
    }
    opts.loss.validate()?;
    let batch_size = opts.batch_size.unwrap_or(cfg.batch_size);
    let lr = opts.learning_rate.unwrap_or(cfg.learning_rate);
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let samples = Samples::from_partition(train, cfg.kind.is_windowed(), cfg.input_rows);
    if samples.units() == 0 {
        return Err(Error::InvalidArgument("training partition has no valid rows".into()));
    }
    if !val.vectors.iter().any(|v| v.valid) {
        return Err(Error::InvalidArgument("validation partition has no valid rows".into()));
    }

    let mut adam = AdamState::new(&model.params());
    let mut rng = DatasetRng::new(cfg.seed);
    let mut order: Vec<usize> = (0..samples.units()).collect();
    let mut tracker = BestTracker::default();
    let mut best_snapshot = None;
    let mut history = Vec::with_capacity(opts.epochs);

    for epoch in 1..=opts.epochs {
        rng.shuffle(&mut order);
        let (mut loss_sum, mut batches) = (0.0, 0usize);
        for (step, units) in order.chunks(batch_size).enumerate() {
            let (x, y, mask) = samples.batch(units);
            if !mask.iter().any(|&m| m) {
                continue;
            }
            model.zero_grad();
            let p = model.forward(&x, Mode::Train)?;
            let (loss, grad) = compute_loss(&p.data, &y, &mask, &opts.loss)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step: step + 1,
                    loss: loss as f64,
                });
            }
            model.backward(&Tensor::from_vec(p.shape(), grad)?)?;
            adam.step(&mut model.params_mut(), lr)?;
            loss_sum += loss as f64;
            batches += 1;
        }
        let val_metrics = metrics(&evaluate_partition(model, val)?)?;
        if tracker.observe(epoch, val_metrics.accuracy) {
            best_snapshot = Some(model.snapshot());
        }
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches.max(1) as f64,
            val: val_metrics,
        });
    }
    if let Some(snapshot) = best_snapshot {
        model.restore(&snapshot)?;
    }
    Ok(TrainOutcome {
        history,
        best_epoch: tracker.best_epoch(),
    })
}

pub fn write_history<W: Write>(mut out: W, history: &[EpochRecord]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    writeln!(out, "epoch,train_loss,val_accuracy,val_precision,val_recall")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch,
            r.train_loss,
            r.val.accuracy,
            opt(r.val.precision),
            opt(r.val.recall)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_keep_the_earlier_epoch() {
        let mut t = BestTracker::default();
        for (e, a) in [0.7, 0.9, 0.8, 0.9].into_iter().enumerate() {
            t.observe(e + 1, a);
        }
        assert_eq!(t.best_epoch(), Some(2));
    }
}
