use serde::{Deserialize, Serialize};

use super::tensor::Scalar;
use crate::error::{Error, Result};

/// BCE and focal clamp probabilities to `[EPS, 1 - EPS]` before taking logarithms.
pub const EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bce,
    Focal,
    Dice,
    Iou,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bce" => Ok(LossKind::Bce),
            "focal" => Ok(LossKind::Focal),
            "dice" => Ok(LossKind::Dice),
            "iou" => Ok(LossKind::Iou),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss '{other}' (expected bce, focal, dice or iou)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Focal weighting factor for the positive class.
    pub alpha: f64,
    /// Focal focusing parameter.
    pub gamma: f64,
}

impl LossConfig {
    pub fn new(kind: LossKind) -> Self {
        LossConfig { kind, alpha: 0.25, gamma: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("focal alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("focal gamma must be >= 0, got {}", self.gamma)));
        }
        Ok(())
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig::new(LossKind::Bce)
    }
}

/// Loss over the entries where `mask` is true, and its gradient with respect
/// to `p` (zero at masked entries).
///
/// BCE and focal are means over the `N` valid entries. Dice and IoU are
/// computed over the valid entries as one set:
/// `dice = 1 - 2·Σyp / (Σy + Σp)`, `iou = 1 - Σyp / (Σy + Σp - Σyp)`,
/// both 0 when the denominator vanishes.
pub fn compute_loss<F: Scalar>(p: &[F], y: &[F], mask: &[bool], cfg: &LossConfig) -> Result<(F, Vec<F>)> {
    if p.len() != y.len() || p.len() != mask.len() {
        return Err(Error::Shape(format!(
            "loss inputs differ in length: p {}, y {}, mask {}",
            p.len(),
            y.len(),
            mask.len()
        )));
    }
    let n = mask.iter().filter(|&&m| m).count();
    if n == 0 {
        return Err(Error::InvalidArgument("loss over a batch with no valid entries".into()));
    }
    cfg.validate()?;
    let eps = F::lit(EPS);
    let one = F::one();
    let clamp = |v: F| v.max(eps).min(one - eps);
    let nf = F::from_usize(n).unwrap();
    let mut grad = vec![F::zero(); p.len()];

    let value = match cfg.kind {
        LossKind::Bce => {
            let mut total = F::zero();
            for i in (0..p.len()).filter(|&i| mask[i]) {
                let (pi, yi) = (clamp(p[i]), y[i]);
                total -= yi * pi.ln() + (one - yi) * (one - pi).ln();
                grad[i] = (-(yi / pi) + (one - yi) / (one - pi)) / nf;
            }
            total / nf
        }
        LossKind::Focal => {
            let alpha = F::lit(cfg.alpha);
            let gamma = F::lit(cfg.gamma);
            let mut total = F::zero();
            for i in (0..p.len()).filter(|&i| mask[i]) {
                let (pi, yi) = (clamp(p[i]), y[i]);
                let q = one - pi;
                let lp = pi.ln();
                let lq = q.ln();
                total -= alpha * yi * q.powf(gamma) * lp + (one - alpha) * (one - yi) * pi.powf(gamma) * lq;
                // d/dp of -(1-p)^γ ln p and of -p^γ ln(1-p); the γ-terms vanish at γ = 0.
                let d_pos = if cfg.gamma == 0.0 {
                    -one / pi
                } else {
                    gamma * q.powf(gamma - one) * lp - q.powf(gamma) / pi
                };
                let d_neg = if cfg.gamma == 0.0 {
                    one / q
                } else {
                    -gamma * pi.powf(gamma - one) * lq + pi.powf(gamma) / q
                };
                grad[i] = (alpha * yi * d_pos + (one - alpha) * (one - yi) * d_neg) / nf;
            }
            total / nf
        }
        LossKind::Dice | LossKind::Iou => {
            let (mut sy, mut sp, mut syp) = (F::zero(), F::zero(), F::zero());
            // No logarithms here, so no clamping: exact predictions score exactly 0.
            for i in (0..p.len()).filter(|&i| mask[i]) {
                let pi = p[i];
                sy += y[i];
                sp += pi;
                syp += y[i] * pi;
            }
            let two = one + one;
            if cfg.kind == LossKind::Dice {
                let t = sy + sp;
                if t == F::zero() {
                    F::zero()
                } else {
                    for i in (0..p.len()).filter(|&i| mask[i]) {
                        grad[i] = -two * (y[i] * t - syp) / (t * t);
                    }
                    one - two * syp / t
                }
            } else {
                let u = sy + sp - syp;
                if u == F::zero() {
                    F::zero()
                } else {
                    for i in (0..p.len()).filter(|&i| mask[i]) {
                        grad[i] = -(y[i] * u - syp * (one - y[i])) / (u * u);
                    }
                    one - syp / u
                }
            }
        }
    };
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_of_half_is_ln2() {
        let (v, _) = compute_loss(&[0.5f64, 0.5], &[1.0, 0.0], &[true, true], &LossConfig::new(LossKind::Bce)).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn all_masked_is_an_error() {
        let r = compute_loss(&[0.5f64], &[1.0], &[false], &LossConfig::default());
        assert!(r.is_err());
    }
}
