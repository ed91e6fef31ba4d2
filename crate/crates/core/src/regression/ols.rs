//! Ordinary least squares with an intercept, solved by QR.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::RegressionError;

/// Relative size of an `R` diagonal entry below which a column counts as
/// linearly dependent on the columns before it.
const RANK_TOLERANCE: f64 = 1e-10;

/// A fitted linear model `y = intercept + x · coefficients`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OlsFit {
    pub intercept: f64,
    /// One per input column; zero for dropped constant columns.
    pub coefficients: Vec<f64>,
    /// Indices of columns dropped for being constant.
    pub dropped: Vec<usize>,
    /// Training mean squared residual (maximum-likelihood variance).
    pub residual_variance: f64,
    pub n: usize,
}

impl OlsFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Fits `y` on the columns of the row-major design `x` plus an intercept.
/// `names` label the columns in error messages.
pub fn fit_ols(x: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<OlsFit, RegressionError> {
    let n = y.len();
    if x.len() != n {
        return Err(RegressionError::LengthMismatch { left: x.len(), right: n });
    }
    let p = names.len();
    if x.iter().any(|r| r.len() != p) {
        return Err(RegressionError::LengthMismatch { left: x.first().map_or(0, Vec::len), right: p });
    }
    if n < p + 2 {
        return Err(RegressionError::TooFewRows { needed: p + 2, got: n });
    }

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..p {
        let first = x[0][j];
        if x.iter().all(|r| r[j] == first) {
            dropped.push(j);
        } else {
            kept.push(j);
        }
    }

    let k = kept.len() + 1;
    let design = DMatrix::from_fn(n, k, |i, c| if c == 0 { 1.0 } else { x[i][kept[c - 1]] });
    let target = DVector::from_column_slice(y);
    let qr = design.clone().qr();
    let r = qr.r();

    let mut dependent = Vec::new();
    for c in 1..k {
        let norm = design.column(c).norm();
        if r[(c, c)].abs() <= RANK_TOLERANCE * norm {
            dependent.push(names[kept[c - 1]].clone());
        }
    }
    if !dependent.is_empty() {
        return Err(RegressionError::Degenerate { columns: dependent });
    }

    let qty = qr.q().transpose() * &target;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| RegressionError::Degenerate { columns: vec!["intercept".into()] })?;

    let mut coefficients = vec![0.0; p];
    for (c, &j) in kept.iter().enumerate() {
        coefficients[j] = beta[c + 1];
    }
    let mut fit = OlsFit { intercept: beta[0], coefficients, dropped, residual_variance: 0.0, n };
    let sse: f64 = x.iter().zip(y).map(|(row, &yi)| (yi - fit.predict(row)).powi(2)).sum();
    fit.residual_variance = sse / n as f64;
    Ok(fit)
}

/// `1 - SSE/SST` on held-out rows, with SST around the held-out mean.
pub fn heldout_r2(fit: &OlsFit, x: &[Vec<f64>], y: &[f64]) -> Result<f64, RegressionError> {
    if y.len() < 2 {
        return Err(RegressionError::TooFewRows { needed: 2, got: y.len() });
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(RegressionError::UndefinedR2);
    }
    let sse: f64 = x.iter().zip(y).map(|(row, &yi)| (yi - fit.predict(row)).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

/// Where the Gaussian variance for held-out log-likelihoods comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VarianceSource {
    /// The model's training residual variance.
    #[default]
    Training,
    /// The model's mean squared residual on the held-out rows.
    Test,
}

fn mean_llh(fit: &OlsFit, x: &[Vec<f64>], y: &[f64], source: VarianceSource) -> Result<f64, RegressionError> {
    let sq: Vec<f64> = x.iter().zip(y).map(|(row, &yi)| (yi - fit.predict(row)).powi(2)).collect();
    let var = match source {
        VarianceSource::Training => fit.residual_variance,
        VarianceSource::Test => sq.iter().sum::<f64>() / sq.len() as f64,
    };
    // residuals at rounding level count as an exact fit
    let scale = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    if !(var > 1e-24 * scale.max(f64::MIN_POSITIVE)) {
        return Err(RegressionError::DegenerateLikelihood);
    }
    let norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    Ok(sq.iter().map(|s| norm - s / (2.0 * var)).sum::<f64>() / sq.len() as f64)
}

/// Mean per-row Gaussian log-likelihood of `target` minus that of `baseline`.
/// Each model sees its own columns of the same held-out rows.
pub fn delta_llh(
    baseline: &OlsFit,
    baseline_x: &[Vec<f64>],
    target: &OlsFit,
    target_x: &[Vec<f64>],
    y: &[f64],
    source: VarianceSource,
) -> Result<f64, RegressionError> {
    if y.is_empty() {
        return Err(RegressionError::TooFewRows { needed: 1, got: 0 });
    }
    Ok(mean_llh(target, target_x, y, source)? - mean_llh(baseline, baseline_x, y, source)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn perfect_line() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        let fit = fit_ols(&x, &y, &names(1)).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((heldout_r2(&fit, &x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_response() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![3.5; 10];
        let fit = fit_ols(&x, &y, &names(2)).unwrap();
        assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-12));
        assert!((fit.intercept - 3.5).abs() < 1e-12);
        assert!(matches!(heldout_r2(&fit, &x, &y), Err(RegressionError::UndefinedR2)));
    }

    #[test]
    fn constant_columns_are_dropped() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![7.0, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let fit = fit_ols(&x, &y, &names(2)).unwrap();
        assert_eq!(fit.dropped, vec![0]);
        assert_eq!(fit.coefficients[0], 0.0);
    }

    #[test]
    fn duplicated_column_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Vec<f64>> = (0..20).map(|_| {
            let v: f64 = rng.random();
            vec![v, rng.random(), v]
        }).collect();
        let y: Vec<f64> = (0..20).map(|_| rng.random()).collect();
        match fit_ols(&x, &y, &names(3)) {
            Err(RegressionError::Degenerate { columns }) => assert_eq!(columns, vec!["x2".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(fit_ols(&x, &[1.0, 2.0], &names(1)), Err(RegressionError::TooFewRows { needed: 3, got: 2 })));
    }

    #[test]
    fn mean_prediction_scores_zero() {
        let y = [1.0, 2.0, 6.0];
        let fit = OlsFit { intercept: 3.0, coefficients: vec![], dropped: vec![], residual_variance: 1.0, n: 3 };
        assert_eq!(heldout_r2(&fit, &[vec![], vec![], vec![]], &y).unwrap(), 0.0);
    }

    #[test]
    fn r2_matches_signal_fraction() {
        // y = x + e with Var(x) = 1, Var(e) = 0.5: population R^2 = 2/3
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let nx = Normal::new(0.0, 1.0).unwrap();
        let ne = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
        let gen = |rng: &mut ChaCha8Rng, n: usize| {
            let x: Vec<Vec<f64>> = (0..n).map(|_| vec![nx.sample(rng)]).collect();
            let y: Vec<f64> = x.iter().map(|r| r[0] + ne.sample(rng)).collect();
            (x, y)
        };
        let (xt, yt) = gen(&mut rng, 10_000);
        let fit = fit_ols(&xt, &yt, &names(1)).unwrap();
        let (xh, yh) = gen(&mut rng, 10_000);
        let r2 = heldout_r2(&fit, &xh, &yh).unwrap();
        // standard error of R^2 at n = 10^4 is about 0.005
        assert!((r2 - 2.0 / 3.0).abs() < 0.02, "{r2}");
    }

    #[test]
    fn llh_gap_matches_gaussian_closed_form() {
        // truth y = 2x + e, e ~ N(0, 1), x ~ N(0, 1). Baseline (mean only) has
        // variance 5; the per-row expected gap is 0.5 ln 5.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<Vec<f64>> = (0..20_000).map(|_| vec![n.sample(&mut rng)]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + n.sample(&mut rng)).collect();
        let (train, test) = (0..10_000, 10_000..20_000);
        let empty: Vec<Vec<f64>> = vec![vec![]; 20_000];
        let base = fit_ols(&empty[train.clone()], &y[train.clone()], &[]).unwrap();
        let target = fit_ols(&x[train.clone()], &y[train], &names(1)).unwrap();
        let d = delta_llh(&base, &empty[test.clone()], &target, &x[test.clone()], &y[test], VarianceSource::Training).unwrap();
        assert!((d - 0.5 * 5f64.ln()).abs() < 0.03, "{d}");
        let same = delta_llh(&target, &x[..100], &target, &x[..100], &y[..100], VarianceSource::Test).unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn overfit_target_loses_on_heldout() {
        // 8 noise columns fit on 12 rows
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<Vec<f64>> = (0..112).map(|_| (0..8).map(|_| n.sample(&mut rng)).collect()).collect();
        let y: Vec<f64> = (0..112).map(|_| n.sample(&mut rng)).collect();
        let empty: Vec<Vec<f64>> = vec![vec![]; 112];
        let base = fit_ols(&empty[..12], &y[..12], &[]).unwrap();
        let target = fit_ols(&x[..12], &y[..12], &names(8)).unwrap();
        let d = delta_llh(&base, &empty[12..], &target, &x[12..], &y[12..], VarianceSource::Training).unwrap();
        assert!(d < 0.0, "{d}");
    }

    #[test]
    fn zero_residual_variance_is_degenerate() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let fit = fit_ols(&x, &y, &names(1)).unwrap();
        let r = delta_llh(&fit, &x, &fit, &x, &y, VarianceSource::Training);
        assert!(matches!(r, Err(RegressionError::DegenerateLikelihood)));
    }
}
