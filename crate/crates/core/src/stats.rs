//! Pearson chi-square goodness of fit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::Error;

/// Smallest admissible expected cell count.
pub const MIN_EXPECTED_COUNT: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Tests observed counts against cell probabilities.
///
/// Cells with zero probability must be empty (otherwise the p-value is 0)
/// and are excluded from the degrees of freedom. Every remaining expected
/// count must be at least [`MIN_EXPECTED_COUNT`].
pub fn chi_square_test(observed: &[u64], probs: &[f64]) -> Result<ChiSquareResult, Error> {
    if observed.len() != probs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} observed cells vs {} probabilities",
            observed.len(),
            probs.len()
        )));
    }
    let total: u64 = observed.iter().sum();
    let mut statistic = 0.0;
    let mut cells = 0usize;
    let mut impossible_hit = false;
    let mut min_expected = f64::INFINITY;
    for (&o, &p) in observed.iter().zip(probs) {
        if p <= 0.0 {
            impossible_hit |= o > 0;
            continue;
        }
        let e = p * total as f64;
        min_expected = min_expected.min(e);
        let d = o as f64 - e;
        statistic += d * d / e;
        cells += 1;
    }
    if min_expected < MIN_EXPECTED_COUNT {
        return Err(Error::TooFewSamples(format!("{min_expected:.3}")));
    }
    let degrees_of_freedom = cells.saturating_sub(1);
    let p_value = if impossible_hit {
        0.0
    } else if degrees_of_freedom == 0 {
        1.0
    } else {
        ChiSquared::new(degrees_of_freedom as f64)
            .expect("positive degrees of freedom")
            .sf(statistic)
    };
    Ok(ChiSquareResult {
        statistic,
        degrees_of_freedom,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_frequencies() {
        let r = chi_square_test(&[25, 25, 25, 25], &[0.25; 4]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.degrees_of_freedom, 3);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_value() {
        // Observed (24, 20, 27, 29) against expected (19, 25, 26, 30).
        let r = chi_square_test(&[24, 20, 27, 29], &[0.19, 0.25, 0.26, 0.30]).unwrap();
        assert!((r.statistic - 2.387_584_345_479_082).abs() < 1e-10);
        assert!((r.p_value - 0.49594997742093094).abs() < 1e-8);
    }

    #[test]
    fn validity_rule() {
        assert!(matches!(
            chi_square_test(&[3, 3], &[0.5, 0.5]),
            Err(Error::TooFewSamples(_))
        ));
        assert!(chi_square_test(&[1, 2], &[0.5]).is_err());
    }

    #[test]
    fn zero_probability_cells() {
        let r = chi_square_test(&[50, 0, 50], &[0.5, 0.0, 0.5]).unwrap();
        assert_eq!(r.degrees_of_freedom, 1);
        let r = chi_square_test(&[50, 1, 50], &[0.5, 0.0, 0.5]).unwrap();
        assert_eq!(r.p_value, 0.0);
    }
}
