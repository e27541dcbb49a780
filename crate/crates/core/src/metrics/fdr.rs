use crate::error::{Error, Result};

/// Benjamini–Hochberg step-up adjustment. With the p-values sorted
/// ascending, the adjusted value at rank i is the minimum over j >= i of
/// m * p_(j) / j, capped at 1. Results come back in input order.
pub fn benjamini_hochberg(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidInput(format!(
            "p-values must lie in [0, 1], got {bad}"
        )));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        // p * (m / j) rather than m * p / j: the factor is >= 1 after
        // rounding, so the result never drops below p.
        running = running.min(p_values[i] * (m as f64 / (rank + 1) as f64));
        adjusted[i] = running;
    }
    Ok(adjusted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let adj = benjamini_hochberg(&[0.01, 0.02, 0.03]).unwrap();
        for a in adj {
            assert!((a - 0.03).abs() < 1e-15);
        }
        assert_eq!(benjamini_hochberg(&[0.2; 4]).unwrap(), vec![0.2; 4]);
        assert_eq!(benjamini_hochberg(&[0.37]).unwrap(), vec![0.37]);
        assert!(benjamini_hochberg(&[]).unwrap().is_empty());
        assert_eq!(benjamini_hochberg(&[0.9, 0.8]).unwrap(), vec![0.9, 0.9]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(benjamini_hochberg(&[0.5, 1.2]).is_err());
        assert!(benjamini_hochberg(&[-0.1]).is_err());
        assert!(benjamini_hochberg(&[f64::NAN]).is_err());
    }
}
