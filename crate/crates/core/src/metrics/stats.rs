use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vocab::LabelVector;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelFrequency {
    pub label: String,
    pub count: usize,
    pub fraction: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub scans: usize,
    pub frequencies: Vec<LabelFrequency>,
    /// `histogram[k]` is the number of scans with exactly k positive labels.
    pub histogram: Vec<usize>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    /// Scans with no positive label.
    pub normal_count: usize,
}

/// Linear-interpolation quantile of sorted data (the default method of R and
/// NumPy).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Label frequencies and the distribution of positive-label counts per scan.
pub fn dataset_stats(labels: &[&str], matrix: &[LabelVector]) -> Result<DatasetStats> {
    if matrix.is_empty() {
        return Err(Error::InvalidInput("label matrix has no rows".into()));
    }
    if let Some(row) = matrix.iter().find(|r| r.values.len() != labels.len()) {
        return Err(Error::InvalidInput(format!(
            "row {} has {} values for {} labels",
            row.accession,
            row.values.len(),
            labels.len()
        )));
    }
    let scans = matrix.len();
    let mut counts = vec![0usize; labels.len()];
    let mut histogram = vec![0usize; labels.len() + 1];
    let mut per_scan = Vec::with_capacity(scans);
    for row in matrix {
        let mut k = 0;
        for (c, &v) in counts.iter_mut().zip(&row.values) {
            if v != 0 {
                *c += 1;
                k += 1;
            }
        }
        histogram[k] += 1;
        per_scan.push(k as f64);
    }
    per_scan.sort_by(f64::total_cmp);
    let q1 = quantile(&per_scan, 0.25);
    let q3 = quantile(&per_scan, 0.75);
    Ok(DatasetStats {
        scans,
        frequencies: labels
            .iter()
            .zip(&counts)
            .map(|(l, &c)| {
                let fraction = c as f64 / scans as f64;
                LabelFrequency {
                    label: l.to_string(),
                    count: c,
                    fraction,
                    percent: fraction * 100.0,
                }
            })
            .collect(),
        median: quantile(&per_scan, 0.5),
        q1,
        q3,
        iqr: q3 - q1,
        normal_count: histogram[0],
        histogram,
    })
}

impl DatasetStats {
    /// Plain-text histogram, one line per label count up to the largest
    /// observed count, one `#` per scan (scaled down to `width` columns when
    /// the tallest bar is wider).
    pub fn render_histogram(&self, width: usize) -> String {
        let last = self.histogram.iter().rposition(|&c| c > 0).unwrap_or(0);
        let tallest = self.histogram.iter().copied().max().unwrap_or(0).max(1);
        let scale = if tallest > width {
            width as f64 / tallest as f64
        } else {
            1.0
        };
        let mut out = String::new();
        for (k, &c) in self.histogram[..=last].iter().enumerate() {
            let bar = ((c as f64) * scale).round() as usize;
            let bar = if c > 0 { bar.max(1) } else { 0 };
            let _ = writeln!(out, "{k:>3} | {:<w$} {c}", "#".repeat(bar), w = bar);
        }
        out
    }
}
