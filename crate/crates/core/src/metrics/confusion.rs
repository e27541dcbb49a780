use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn from_pairs(pred: &[u8], truth: &[u8]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::InvalidInput(format!(
                "prediction and truth lengths differ: {} vs {}",
                pred.len(),
                truth.len()
            )));
        }
        let mut c = ConfusionCounts::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p != 0, t != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Which metrics hit a zero denominator and were set to 0 by convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Undefined {
    pub precision: bool,
    pub recall: bool,
    pub f_score: bool,
}

impl Undefined {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f_score
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfusionMetrics {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub accuracy: f64,
    pub undefined: Undefined,
}

impl ConfusionMetrics {
    pub fn from_counts(c: ConfusionCounts) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                (0.0, true)
            } else {
                (num as f64 / den as f64, false)
            }
        };
        let (precision, p_undef) = ratio(c.tp, c.tp + c.fp);
        let (recall, r_undef) = ratio(c.tp, c.tp + c.fn_);
        let (f_score, f_undef) = if precision + recall > 0.0 {
            (2.0 * precision * recall / (precision + recall), false)
        } else {
            (0.0, true)
        };
        let accuracy = if c.total() == 0 {
            0.0
        } else {
            (c.tp + c.tn) as f64 / c.total() as f64
        };
        ConfusionMetrics {
            counts: c,
            precision,
            recall,
            f_score,
            accuracy,
            undefined: Undefined {
                precision: p_undef,
                recall: r_undef,
                f_score: f_undef,
            },
        }
    }
}

/// Precision, recall, F-score and accuracy of binary predictions.
///
/// Precision, recall and F are 0 when their denominator is 0; the
/// `undefined` flags record when that happened.
pub fn confusion_metrics(pred: &[u8], truth: &[u8]) -> Result<ConfusionMetrics> {
    Ok(ConfusionMetrics::from_counts(ConfusionCounts::from_pairs(
        pred, truth,
    )?))
}
