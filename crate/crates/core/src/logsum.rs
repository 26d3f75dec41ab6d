//! Numerically stable log-sum-exp reductions.
//!
//! Partition values and mixture weights in this crate span hundreds of orders
//! of magnitude, so sums of exponentials are always reduced with the usual
//! max-subtraction trick. `-inf` inputs are treated as exact zero terms and
//! simply drop out of the sum.

/// `log(Σ exp(x_i))` over a slice, stable against overflow and underflow.
///
/// Returns `-inf` for an empty slice or a slice of all `-inf` (an empty sum).
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        // Either no terms or all terms are exp(-inf) = 0.
        return f64::NEG_INFINITY;
    }
    if !max.is_finite() {
        // +inf (or NaN) dominates; subtracting it would produce inf - inf.
        return max;
    }
    // With a finite max, -inf terms contribute exp(-inf) = 0 and drop out.
    let sum: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `k · log_v` with the convention that zero factors contribute nothing,
/// even when `log_v = −∞` (a count of zero times log of zero is log of an
/// empty product, i.e. 0, not NaN).
pub(crate) fn count_times_log(k: usize, log_v: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * log_v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum_in_safe_range() {
        let xs = [0.5_f64, 2.0, -1.3];
        let naive = xs.iter().map(|x| f64::exp(*x)).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn survives_large_magnitudes() {
        // exp(1234) overflows f64; the reduction must not.
        let xs = [1234.0, 1232.0];
        let expected = 1232.0 + (1.0 + 2.0f64.exp()).ln();
        assert!((log_sum_exp(&xs) - expected).abs() < 1e-12);
    }

    #[test]
    fn survives_tiny_magnitudes() {
        let xs = [-1234.0, -1236.0];
        let expected = -1234.0 + (1.0 + (-2.0f64).exp()).ln();
        assert!((log_sum_exp(&xs) - expected).abs() < 1e-12);
    }

    #[test]
    fn neg_infinity_terms_drop_out() {
        let xs = [f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY];
        assert_eq!(log_sum_exp(&xs), 0.0);
    }

    #[test]
    fn empty_and_all_neg_infinity_give_neg_infinity() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn single_term_is_identity() {
        assert_eq!(log_sum_exp(&[-3.25]), -3.25);
    }

    #[test]
    fn zero_count_times_log_zero_is_zero() {
        assert_eq!(count_times_log(0, f64::NEG_INFINITY), 0.0);
        assert_eq!(count_times_log(3, -2.0), -6.0);
    }
}
