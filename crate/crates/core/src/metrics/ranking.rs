use crate::error::{Error, Result};

/// Scores paired with binary labels (nonzero = positive).
#[derive(Debug, Clone, Copy)]
pub struct ScoredSet<'a> {
    pub scores: &'a [f64],
    pub labels: &'a [u8],
}

impl<'a> ScoredSet<'a> {
    pub fn new(scores: &'a [f64], labels: &'a [u8]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "scores and labels lengths differ: {} vs {}",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidInput("scores contain NaN".into()));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn negatives(&self) -> usize {
        self.labels.len() - self.positives()
    }

    fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (&s, &l) in self.scores.iter().zip(self.labels) {
            if l != 0 {
                pos.push(s);
            } else {
                neg.push(s);
            }
        }
        (pos, neg)
    }

    pub(crate) fn require_both_classes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (pos, neg) = self.split();
        if pos.is_empty() || neg.is_empty() {
            return Err(Error::InvalidInput(
                "ranking metrics need at least one positive and one negative".into(),
            ));
        }
        Ok((pos, neg))
    }
}

/// 1-based ranks with ties given their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve as the Mann–Whitney statistic: the fraction of
/// positive/negative pairs where the positive scores higher, ties counting
/// one half.
pub fn auroc(set: &ScoredSet) -> Result<f64> {
    let (pos, neg) = set.require_both_classes()?;
    let ranks = midranks(set.scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(set.labels)
        .filter(|(_, &l)| l != 0)
        .map(|(r, _)| r)
        .sum();
    let p = pos.len() as f64;
    let n = neg.len() as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: the sum of precision at each positive in the ranking,
/// divided by the number of positives. Items are ranked by descending score;
/// equal scores keep their input order.
pub fn average_precision(set: &ScoredSet) -> Result<f64> {
    let positives = set.positives();
    if positives == 0 {
        return Err(Error::InvalidInput(
            "average precision needs at least one positive".into(),
        ));
    }
    let mut order: Vec<usize> = (0..set.scores.len()).collect();
    order.sort_by(|&a, &b| set.scores[b].total_cmp(&set.scores[a]));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if set.labels[i] != 0 {
            hits += 1;
            total += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(total / positives as f64)
}
