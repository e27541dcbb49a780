//! Shared inputs for the benchmarks.

use sarle::synth::generate_reports;
use sarle::ReportRecord;

/// A fixed synthetic corpus of `n` reports.
pub fn corpus(n: usize) -> Vec<ReportRecord> {
    generate_reports(n, 42)
        .into_iter()
        .map(|r| r.record)
        .collect()
}

/// Deterministic pseudo-random scores and labels for ranking benchmarks.
pub fn scored(n: usize) -> (Vec<f64>, Vec<f64>, Vec<u8>) {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let labels: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
    let a = labels.iter().map(|&l| next() + 0.3 * l as f64).collect();
    let b = labels.iter().map(|&l| next() + 0.2 * l as f64).collect();
    (a, b, labels)
}
