//! End-to-end plumbing shared by the CLI: labeling records, label-matrix
//! files, provenance logs and evaluation/statistics reports.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::corpus::ReportRecord;
use crate::detect::PolarityRules;
use crate::error::{Error, Result};
use crate::hybrid::{extract_labels_hybrid_traced, SentenceClassifier};
use crate::metrics::{confusion_metrics, ConfusionMetrics, DatasetStats};
use crate::normalize::{normalize_report, NormalizedReport};
use crate::vocab::{extract_labels_traced, LabelVector, Provenance, Vocabulary};

/// How sentences are split into normal and abnormal text.
#[derive(Debug, Clone, Copy)]
pub enum Labeler<'a> {
    Rules(&'a PolarityRules),
    Hybrid(&'a SentenceClassifier),
}

pub fn label_report(
    report: &NormalizedReport,
    vocab: &Vocabulary,
    labeler: Labeler<'_>,
) -> (LabelVector, Vec<Provenance>) {
    match labeler {
        Labeler::Rules(rules) => extract_labels_traced(report, vocab, rules),
        Labeler::Hybrid(model) => extract_labels_hybrid_traced(report, model, vocab),
    }
}

pub fn label_record(
    record: &ReportRecord,
    vocab: &Vocabulary,
    labeler: Labeler<'_>,
) -> (LabelVector, Vec<Provenance>) {
    label_report(
        &normalize_report(&record.accession, &record.text),
        vocab,
        labeler,
    )
}

/// A label matrix as read from or written to CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    pub labels: Vec<String>,
    pub rows: Vec<LabelVector>,
}

impl LabelMatrix {
    pub fn new(labels: Vec<String>, rows: Vec<LabelVector>) -> Self {
        LabelMatrix { labels, rows }
    }

    pub fn label_refs(&self) -> Vec<&str> {
        self.labels.iter().map(String::as_str).collect()
    }

    /// CSV with header `accession,<labels...>` and one 0/1 row per report.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["accession"];
        header.extend(self.labels.iter().map(String::as_str));
        wtr.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.accession.clone()];
            rec.extend(row.values.iter().map(u8::to_string));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<matrix output>", e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            Some(h) => h?,
            None => return Err(Error::parse(path, 1, "missing header row")),
        };
        if header.get(0) != Some("accession") {
            return Err(Error::parse(path, 1, "first column must be `accession`"));
        }
        let labels: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut rows = Vec::new();
        for (i, rec) in records.enumerate() {
            let line = i + 2;
            let rec = rec?;
            if rec.len() != labels.len() + 1 {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected {} columns, got {}", labels.len() + 1, rec.len()),
                ));
            }
            let values = rec
                .iter()
                .skip(1)
                .map(|v| match v.trim() {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(Error::parse(
                        path,
                        line,
                        format!("expected 0 or 1, got {other:?}"),
                    )),
                })
                .collect::<Result<Vec<u8>>>()?;
            rows.push(LabelVector {
                accession: rec[0].to_string(),
                values,
            });
        }
        Ok(LabelMatrix { labels, rows })
    }
}

pub fn write_provenance<W: Write>(mut out: W, entries: &[Provenance]) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub label: String,
    pub n_pos: usize,
    pub metrics: ConfusionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f_score: f64,
    pub macro_accuracy: f64,
}

fn describe<T: Ord + std::fmt::Debug>(only_a: Vec<T>, only_b: Vec<T>, a: &str, b: &str) -> String {
    let mut parts = Vec::new();
    if !only_a.is_empty() {
        parts.push(format!("only in {a}: {only_a:?}"));
    }
    if !only_b.is_empty() {
        parts.push(format!("only in {b}: {only_b:?}"));
    }
    parts.join("; ")
}

/// Per-label confusion metrics of `pred` against `truth` plus their macro
/// average. Both matrices must have the same label order and accession set.
pub fn evaluate(pred: &LabelMatrix, truth: &LabelMatrix) -> Result<EvalReport> {
    if pred.labels != truth.labels {
        let p: BTreeSet<&String> = pred.labels.iter().collect();
        let t: BTreeSet<&String> = truth.labels.iter().collect();
        let detail = describe(
            p.difference(&t).collect(),
            t.difference(&p).collect(),
            "predictions",
            "truth",
        );
        return Err(Error::InvalidInput(format!(
            "label columns differ{}",
            if detail.is_empty() {
                " in order".to_string()
            } else {
                format!(": {detail}")
            }
        )));
    }
    let pred_by_acc: HashMap<&str, &LabelVector> = pred
        .rows
        .iter()
        .map(|r| (r.accession.as_str(), r))
        .collect();
    let p: BTreeSet<&str> = pred_by_acc.keys().copied().collect();
    let t: BTreeSet<&str> = truth.rows.iter().map(|r| r.accession.as_str()).collect();
    if p != t || p.len() != pred.rows.len() || t.len() != truth.rows.len() {
        let detail = describe(
            p.difference(&t).collect(),
            t.difference(&p).collect(),
            "predictions",
            "truth",
        );
        return Err(Error::InvalidInput(format!(
            "accession sets differ{}",
            if detail.is_empty() {
                " (duplicate accessions)".to_string()
            } else {
                format!(": {detail}")
            }
        )));
    }
    let mut rows = Vec::with_capacity(truth.labels.len());
    for (j, label) in truth.labels.iter().enumerate() {
        let truth_col: Vec<u8> = truth.rows.iter().map(|r| r.values[j]).collect();
        let pred_col: Vec<u8> = truth
            .rows
            .iter()
            .map(|r| pred_by_acc[r.accession.as_str()].values[j])
            .collect();
        let metrics = confusion_metrics(&pred_col, &truth_col)?;
        rows.push(EvalRow {
            label: label.clone(),
            n_pos: truth_col.iter().filter(|&&v| v == 1).count(),
            metrics,
        });
    }
    let avg = |i: usize| {
        let defined: Vec<f64> = rows.iter().filter_map(|r| scored(&r.metrics)[i]).collect();
        if defined.is_empty() {
            0.0
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        }
    };
    Ok(EvalReport {
        macro_precision: avg(0),
        macro_recall: avg(1),
        macro_f_score: avg(2),
        macro_accuracy: avg(3),
        rows,
    })
}

/// Precision, recall, F-score and accuracy, with `None` where the metric has
/// nothing to measure: no predicted positives, no true positives, or neither,
/// respectively. Undefined metrics are left out of macro averages.
fn scored(m: &ConfusionMetrics) -> [Option<f64>; 4] {
    let c = &m.counts;
    let keep = |undefined: bool, v: f64| (!undefined).then_some(v);
    [
        keep(m.undefined.precision, m.precision),
        keep(m.undefined.recall, m.recall),
        keep(c.tp + c.fp + c.fn_ == 0, m.f_score),
        keep(c.total() == 0, m.accuracy),
    ]
}

impl EvalReport {
    /// Columns `label,n_pos,precision,recall,f_score,accuracy`, one row per
    /// label and a final `macro_average` row. Undefined metrics are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record([
            "label",
            "n_pos",
            "precision",
            "recall",
            "f_score",
            "accuracy",
        ])?;
        let fmt = |x: f64| format!("{x:.4}");
        for r in &self.rows {
            let mut rec = vec![r.label.clone(), r.n_pos.to_string()];
            rec.extend(scored(&r.metrics).map(|v| v.map_or_else(String::new, fmt)));
            wtr.write_record(&rec)?;
        }
        wtr.write_record([
            "macro_average".to_string(),
            self.rows.iter().map(|r| r.n_pos).sum::<usize>().to_string(),
            fmt(self.macro_precision),
            fmt(self.macro_recall),
            fmt(self.macro_f_score),
            fmt(self.macro_accuracy),
        ])?;
        wtr.flush().map_err(|e| Error::io("<eval output>", e))
    }
}

/// Per-label frequency table: `label,count,percent`.
pub fn write_stats_csv<W: Write>(out: W, stats: &DatasetStats) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["label", "count", "percent"])?;
    for f in &stats.frequencies {
        wtr.write_record([
            f.label.clone(),
            f.count.to_string(),
            format!("{:.2}", f.percent),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<stats output>", e))
}

#[derive(Debug, Serialize)]
pub struct StatsSummary {
    pub scans: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub normal_count: usize,
    pub histogram: Vec<usize>,
}

impl From<&DatasetStats> for StatsSummary {
    fn from(s: &DatasetStats) -> Self {
        StatsSummary {
            scans: s.scans,
            median: s.median,
            q1: s.q1,
            q3: s.q3,
            iqr: s.iqr,
            normal_count: s.normal_count,
            histogram: s.histogram.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[(&str, &[u8])]) -> LabelMatrix {
        LabelMatrix::new(
            vec!["a".into(), "b".into()],
            rows.iter()
                .map(|(acc, v)| LabelVector {
                    accession: acc.to_string(),
                    values: v.to_vec(),
                })
                .collect(),
        )
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = matrix(&[("r1", &[1, 0]), ("r2", &[0, 1])]);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "accession,a,b\nr1,1,0\nr2,0,1\n"
        );
        let back = LabelMatrix::from_reader(&buf[..], Path::new("m.csv")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_csv_errors() {
        let err = LabelMatrix::from_reader("accession,a\nr1,2\n".as_bytes(), Path::new("m.csv"))
            .unwrap_err();
        assert!(err.to_string().starts_with("m.csv:2:"), "{err}");
        assert!(LabelMatrix::from_reader("acc,a\n".as_bytes(), Path::new("m")).is_err());
        assert!(LabelMatrix::from_reader("".as_bytes(), Path::new("m")).is_err());
    }

    #[test]
    fn eval_aligns_by_accession() {
        let truth = matrix(&[("r1", &[1, 0]), ("r2", &[0, 1])]);
        let pred = matrix(&[("r2", &[0, 1]), ("r1", &[1, 0])]);
        let rep = evaluate(&pred, &truth).unwrap();
        assert_eq!(rep.macro_f_score, 1.0);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(
            text.ends_with("macro_average,2,1.0000,1.0000,1.0000,1.0000\n"),
            "{text}"
        );
    }

    #[test]
    fn undefined_metrics_are_blank_and_skip_the_macro_average() {
        let truth = matrix(&[("r1", &[1, 0]), ("r2", &[0, 0])]);
        let rep = evaluate(&truth, &truth).unwrap();
        assert_eq!(rep.macro_precision, 1.0);
        assert_eq!(rep.macro_f_score, 1.0);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\nb,0,,,,1.0000\n"), "{text}");

        let pred = matrix(&[("r1", &[1, 1]), ("r2", &[0, 0])]);
        let rep = evaluate(&pred, &truth).unwrap();
        assert_eq!(rep.macro_precision, 0.5);
        assert_eq!(rep.macro_recall, 1.0);
        assert_eq!(rep.macro_f_score, 0.5);
    }

    #[test]
    fn eval_flipped_cell_is_local() {
        let truth = matrix(&[("r1", &[1, 0]), ("r2", &[0, 1])]);
        let pred = matrix(&[("r1", &[1, 1]), ("r2", &[0, 1])]);
        let rep = evaluate(&pred, &truth).unwrap();
        assert_eq!(rep.rows[0].metrics.f_score, 1.0);
        assert!(rep.rows[1].metrics.precision < 1.0);
    }

    #[test]
    fn eval_mismatches() {
        let truth = matrix(&[("r1", &[1, 0])]);
        let pred = matrix(&[("r9", &[1, 0])]);
        let err = evaluate(&pred, &truth).unwrap_err().to_string();
        assert!(err.contains("r9") && err.contains("r1"), "{err}");
        let mut other = truth.clone();
        other.labels = vec!["a".into(), "c".into()];
        let err = evaluate(&other, &truth).unwrap_err().to_string();
        assert!(err.contains("\"c\""), "{err}");
    }
}
