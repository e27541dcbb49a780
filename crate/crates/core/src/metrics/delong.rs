//! DeLong comparison of two correlated AUROCs measured on the same cases.
//!
//! Placement values come from midranks, so the whole test is O(n log n).
//! Variances use the (n - 1) sample covariance of the placement values and
//! confidence intervals are clipped to [0, 1], matching the pROC package.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use super::ranking::{auroc, midranks, ScoredSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub covariance: f64,
    /// 95% intervals.
    pub ci_a: (f64, f64),
    pub ci_b: (f64, f64),
    pub z: f64,
    pub p_value: f64,
    /// The AUCs differ but the variance of the difference is zero; `z` is
    /// infinite and `p_value` is 0.
    pub degenerate: bool,
}

/// Per-case placement values of one score vector: for each positive, the
/// fraction of negatives it outranks; for each negative, the fraction of
/// positives that outrank it. Ties count one half.
fn placements(pos: &[f64], neg: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = pos.len();
    let n = neg.len();
    let all: Vec<f64> = pos.iter().chain(neg).copied().collect();
    let r_all = midranks(&all);
    let r_pos = midranks(pos);
    let r_neg = midranks(neg);
    let v10 = (0..m).map(|i| (r_all[i] - r_pos[i]) / n as f64).collect();
    let v01 = (0..n)
        .map(|j| 1.0 - (r_all[m + j] - r_neg[j]) / m as f64)
        .collect();
    (v10, v01)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (a.len() - 1) as f64
}

fn interval(auc: f64, var: f64, z: f64) -> (f64, f64) {
    let half = z * var.sqrt();
    ((auc - half).max(0.0), (auc + half).min(1.0))
}

/// Two-sided DeLong test of `auroc(scores_a) == auroc(scores_b)` on shared
/// labels, with 95% confidence intervals for each AUROC.
pub fn delong_test(scores_a: &[f64], scores_b: &[f64], labels: &[u8]) -> Result<DelongResult> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::InvalidInput(format!(
            "score vectors differ in length: {} vs {}",
            scores_a.len(),
            scores_b.len()
        )));
    }
    let set_a = ScoredSet::new(scores_a, labels)?;
    let set_b = ScoredSet::new(scores_b, labels)?;
    let (pos_a, neg_a) = set_a.require_both_classes()?;
    let (pos_b, neg_b) = set_b.require_both_classes()?;
    let (m, n) = (pos_a.len(), neg_a.len());
    if m < 2 || n < 2 {
        return Err(Error::InvalidInput(
            "DeLong variance needs at least two positives and two negatives".into(),
        ));
    }
    let (v10_a, v01_a) = placements(&pos_a, &neg_a);
    let (v10_b, v01_b) = placements(&pos_b, &neg_b);
    // Mathematically equal to the mean of v10; taken from auroc so the two
    // agree to the last bit.
    let auc_a = auroc(&set_a)?;
    let auc_b = auroc(&set_b)?;

    let (m, n) = (m as f64, n as f64);
    let var_a = sample_cov(&v10_a, &v10_a) / m + sample_cov(&v01_a, &v01_a) / n;
    let var_b = sample_cov(&v10_b, &v10_b) / m + sample_cov(&v01_b, &v01_b) / n;
    let covariance = sample_cov(&v10_a, &v10_b) / m + sample_cov(&v01_a, &v01_b) / n;

    let diff = auc_a - auc_b;
    let var_diff = var_a + var_b - 2.0 * covariance;
    let (z, p_value, degenerate) = if diff == 0.0 {
        (0.0, 1.0, false)
    } else if var_diff <= 0.0 {
        (diff.signum() * f64::INFINITY, 0.0, true)
    } else {
        let z = diff / var_diff.sqrt();
        (z, erfc(z.abs() / std::f64::consts::SQRT_2), false)
    };

    let z975 = Normal::standard().inverse_cdf(0.975);
    Ok(DelongResult {
        auc_a,
        auc_b,
        var_a,
        var_b,
        covariance,
        ci_a: interval(auc_a, var_a, z975),
        ci_b: interval(auc_b, var_b, z975),
        z,
        p_value,
        degenerate,
    })
}
