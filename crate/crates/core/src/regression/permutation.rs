//! Paired sign-flip permutation test.

use rand::RngCore;
use serde::Serialize;

use super::RegressionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Alternative {
    /// Mean difference greater than zero.
    Greater,
    TwoSided,
}

/// p-value for the mean of paired differences `a - b` (or `a` alone when
/// `b` is `None`). Each resample flips the sign of every difference
/// independently; `p = (1 + #{T* at least as extreme as T}) / (1 + resamples)`.
pub fn permutation_test(
    a: &[f64],
    b: Option<&[f64]>,
    alternative: Alternative,
    resamples: usize,
    rng: &mut impl RngCore,
) -> Result<f64, RegressionError> {
    let d: Vec<f64> = match b {
        Some(b) if b.len() != a.len() => return Err(RegressionError::LengthMismatch { left: a.len(), right: b.len() }),
        Some(b) => a.iter().zip(b).map(|(x, y)| x - y).collect(),
        None => a.to_vec(),
    };
    if d.is_empty() {
        return Err(RegressionError::TooFewRows { needed: 1, got: 0 });
    }
    let n = d.len() as f64;
    let observed = d.iter().sum::<f64>() / n;
    // summation order differs between T and T*, so ties need slack
    let slack = 1e-12 * d.iter().map(|x| x.abs()).sum::<f64>() / n;
    let mut count = 0usize;
    let mut bits = Vec::with_capacity(d.len().div_ceil(64));
    for _ in 0..resamples {
        bits.clear();
        bits.extend((0..d.len().div_ceil(64)).map(|_| rng.next_u64()));
        let t = d
            .iter()
            .enumerate()
            .map(|(i, x)| if bits[i / 64] >> (i % 64) & 1 == 1 { -x } else { *x })
            .sum::<f64>()
            / n;
        let extreme = match alternative {
            Alternative::Greater => t >= observed - slack,
            Alternative::TwoSided => t.abs() >= observed.abs() - slack,
        };
        count += extreme as usize;
    }
    Ok((1 + count) as f64 / (1 + resamples) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn zero_differences_give_one() {
        let a = vec![0.3; 50];
        let mut rng = substream(0, "t");
        assert_eq!(permutation_test(&a, Some(&a), Alternative::TwoSided, 1000, &mut rng).unwrap(), 1.0);
        assert_eq!(permutation_test(&vec![0.0; 50], None, Alternative::Greater, 1000, &mut rng).unwrap(), 1.0);
    }

    #[test]
    fn constant_shift_is_significant() {
        let mut rng = substream(1, "t");
        let b: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 5.0).collect();
        let p = permutation_test(&a, Some(&b), Alternative::TwoSided, 10_000, &mut rng).unwrap();
        assert!(p <= 0.001, "{p}");
        assert_eq!(p, 1.0 / 10_001.0);
    }

    #[test]
    fn length_mismatch() {
        let mut rng = substream(1, "t");
        assert!(matches!(
            permutation_test(&[1.0], Some(&[1.0, 2.0]), Alternative::TwoSided, 10, &mut rng),
            Err(RegressionError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn null_p_values_are_uniform() {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut data = substream(2, "data");
        let mut rng = substream(2, "perm");
        let mut ps: Vec<f64> = (0..300)
            .map(|_| {
                let d: Vec<f64> = (0..100).map(|_| normal.sample(&mut data)).collect();
                permutation_test(&d, None, Alternative::Greater, 2000, &mut rng).unwrap()
            })
            .collect();
        ps.sort_by(f64::total_cmp);
        let n = ps.len() as f64;
        let ks = ps
            .iter()
            .enumerate()
            .map(|(i, &p)| (p - i as f64 / n).abs().max((p - (i + 1) as f64 / n).abs()))
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic is about 1.63 / sqrt(n)
        assert!(ks < 1.63 / n.sqrt(), "KS {ks}");
    }
}
