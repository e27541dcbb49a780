//! Independent reference computations for the metric and statistics tests.
//! These are deliberately naive and share no code with the crate.
#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fraction of (positive, negative) pairs ranked correctly, ties one half.
pub fn auroc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] == 0 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Builds the precision-recall curve point by point (one point per ranked
/// item, ranked by descending score with input order breaking ties) and sums
/// precision times the recall increment.
pub fn average_precision_curve(scores: &[f64], labels: &[u8]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // insertion sort: stable by construction
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && scores[idx[j - 1]] < scores[idx[j]] {
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    let total_pos = labels.iter().filter(|&&l| l != 0).count() as f64;
    let mut curve = vec![(0.0f64, 1.0f64)];
    for k in 1..=idx.len() {
        let tp = idx[..k].iter().filter(|&&i| labels[i] != 0).count() as f64;
        curve.push((tp / total_pos, tp / k as f64));
    }
    curve.windows(2).map(|w| (w[1].0 - w[0].0) * w[1].1).sum()
}

/// Direct definition: adj_(i) = min over j >= i of p_(j) (m / j), capped at 1.
pub fn bh_suffix_min(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut sorted: Vec<(f64, usize)> = p.iter().copied().zip(0..).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out = vec![0.0; m];
    for i in 0..m {
        let mut best = f64::INFINITY;
        for (j, &(pj, _)) in sorted.iter().enumerate().skip(i) {
            best = best.min(pj * (m as f64 / (j + 1) as f64));
        }
        out[sorted[i].1] = best.min(1.0);
    }
    out
}

/// Median of integer counts: middle element, or mean of the two middles.
pub fn median_sorted(counts: &[usize]) -> f64 {
    let mut v = counts.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    }
}

/// Quartile `k` (1 or 3) by linear interpolation at position (n-1)k/4,
/// computed with integer index arithmetic.
pub fn quartile_sorted(counts: &[usize], k: usize) -> f64 {
    let mut v = counts.to_vec();
    v.sort_unstable();
    let num = (v.len() - 1) * k;
    let lo = num / 4;
    let rem = num % 4;
    if rem == 0 {
        v[lo] as f64
    } else {
        v[lo] as f64 + (v[lo + 1] as f64 - v[lo] as f64) * rem as f64 / 4.0
    }
}

/// Random scores on a coarse grid so ties are common.
pub fn random_instance(r: &mut ChaCha8Rng, max_n: usize) -> (Vec<f64>, Vec<u8>) {
    loop {
        let n = r.random_range(2..=max_n);
        let grid = r.random_range(2..20) as f64;
        let scores: Vec<f64> = (0..n)
            .map(|_| (r.random::<f64>() * grid).floor() / grid)
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| r.random_bool(0.4) as u8).collect();
        if labels.contains(&0) && labels.contains(&1) {
            return (scores, labels);
        }
    }
}

/// True when `s` uses only the normalized alphabet: lowercase ASCII letters,
/// digits, single spaces, periods between digits, and `%` only as the first
/// character of a whole `%time`, `%date` or `%year` token.
pub fn well_formed(s: &str) -> bool {
    if s.starts_with(' ') || s.ends_with(' ') || s.contains("  ") {
        return false;
    }
    s.split(' ').all(|tok| {
        if matches!(tok, "%time" | "%date" | "%year") {
            return true;
        }
        let b = tok.as_bytes();
        b.iter().enumerate().all(|(i, &c)| match c {
            b'a'..=b'z' | b'0'..=b'9' => true,
            b'.' => {
                i > 0 && i + 1 < b.len() && b[i - 1].is_ascii_digit() && b[i + 1].is_ascii_digit()
            }
            _ => false,
        })
    })
}

pub fn fragment() -> impl Strategy<Value = String> {
    prop_oneof![
        "[ -~]{0,12}",
        "[0-9]{1,4}",
        Just(".".to_string()),
        Just(":".to_string()),
        Just("/".to_string()),
        Just(" ".to_string()),
        Just("%".to_string()),
        Just("%year".to_string()),
        Just("%Date".to_string()),
        Just("March ".to_string()),
        Just("sept. ".to_string()),
        Just("10:30 PM".to_string()),
        Just("2015".to_string()),
        Just("1.2".to_string()),
        Just("\t\n".to_string()),
        "\\PC{0,4}",
    ]
}

pub fn fuzz_text() -> impl Strategy<Value = String> {
    proptest::collection::vec(fragment(), 0..12).prop_map(|v| v.concat())
}
