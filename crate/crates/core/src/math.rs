//! Log-space helpers. All probabilities in this crate are natural logs.

/// `ln(exp(a) + exp(b))` without overflow; `-inf` is the additive identity.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// Stable `ln(sum(exp(x)))`; empty input gives `-inf`.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_infinite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Converts a natural-log quantity into `base`.
pub fn rebase(nats: f64, base: f64) -> f64 {
    if base == std::f64::consts::E {
        nats
    } else {
        nats / base.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_matches_direct() {
        assert!((log_add(0.5, 2.0) - 2.201413277982752).abs() < 1e-15);
        assert!((log_add(1234.0, 1232.0) - 1234.126928011043).abs() < 1e-12);
        assert_eq!(log_add(f64::NEG_INFINITY, -3.0), -3.0);
        assert_eq!(log_add(f64::NEG_INFINITY, f64::NEG_INFINITY), f64::NEG_INFINITY);
    }

    #[test]
    fn log_sum_exp_cases() {
        assert_eq!(log_sum_exp(Vec::new()), f64::NEG_INFINITY);
        let v = [0.1f64.ln(), 0.2f64.ln(), 0.7f64.ln()];
        assert!(log_sum_exp(v).abs() < 1e-15);
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn rebase_to_bits() {
        assert!((rebase(2f64.ln(), 2.0) - 1.0).abs() < 1e-15);
        assert_eq!(rebase(0.7, std::f64::consts::E), 0.7);
    }
}
