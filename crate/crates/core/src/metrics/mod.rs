//! Evaluation and statistics: extraction metrics, ranking metrics, the
//! DeLong comparison of correlated AUROCs, Benjamini–Hochberg adjustment and
//! label-matrix summaries.

mod confusion;
mod delong;
mod fdr;
mod ranking;
mod stats;

pub use confusion::{confusion_metrics, ConfusionCounts, ConfusionMetrics, Undefined};
pub use delong::{delong_test, DelongResult};
pub use fdr::benjamini_hochberg;
pub use ranking::{auroc, average_precision, midranks, ScoredSet};
pub use stats::{dataset_stats, quantile, DatasetStats, LabelFrequency};
