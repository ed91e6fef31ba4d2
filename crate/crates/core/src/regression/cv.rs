//! Repeated k-fold cross-validation of baseline against target.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::ols::{delta_llh, fit_ols, heldout_r2, VarianceSource};
use super::predictors::{RegressionData, RowKey, BASELINE_COLUMNS, COLUMN_NAMES};
use super::RegressionError;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seeds: usize,
    pub permutations: usize,
    pub confidence: f64,
    /// Root of every random stream.
    pub seed: u64,
    pub variance: VarianceSource,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { folds: 10, seeds: 10, permutations: 10_000, confidence: 0.95, seed: 0, variance: VarianceSource::Training }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<(), RegressionError> {
        if self.folds < 2 {
            return Err(RegressionError::InvalidConfig(format!("folds must be >= 2, got {}", self.folds)));
        }
        if self.seeds < 1 {
            return Err(RegressionError::InvalidConfig("seeds must be >= 1".into()));
        }
        if self.permutations < 1000 {
            return Err(RegressionError::InvalidConfig(format!("permutations must be >= 1000, got {}", self.permutations)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(RegressionError::InvalidConfig(format!("confidence {} outside (0, 1)", self.confidence)));
        }
        Ok(())
    }
}

/// Row-to-fold assignments per seed over a fixed universe of rows, shared
/// by every spec so their scores are paired.
#[derive(Debug, Clone)]
pub struct FoldPlan {
    folds: usize,
    assignments: Vec<HashMap<RowKey, usize>>,
}

impl FoldPlan {
    /// Shuffles the sorted, deduplicated universe with the seed's stream and
    /// cuts it into `folds` contiguous chunks of equal size (sizes differ by
    /// at most one).
    pub fn new(universe: &[RowKey], folds: usize, seeds: usize, root: u64) -> Self {
        let mut keys = universe.to_vec();
        keys.sort();
        keys.dedup();
        let n = keys.len();
        let assignments = (0..seeds)
            .map(|s| {
                let mut order = keys.clone();
                order.shuffle(&mut substream(root, &format!("folds/{s}")));
                order.into_iter().enumerate().map(|(i, k)| (k, i * folds / n.max(1))).collect()
            })
            .collect();
        Self { folds, assignments }
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn seeds(&self) -> usize {
        self.assignments.len()
    }

    pub fn fold_of(&self, seed: usize, key: &RowKey) -> Option<usize> {
        self.assignments[seed].get(key).copied()
    }
}

/// Scores per `(seed, fold)`, seed-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvScores {
    pub delta_r2: Vec<f64>,
    pub delta_llh: Vec<f64>,
    pub r2_baseline: Vec<f64>,
    pub r2_target: Vec<f64>,
}

/// Mean with a normal-approximation confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64], confidence: f64) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
        let half = z * sd / (n as f64).sqrt();
        Self { mean, ci_low: mean - half, ci_high: mean + half, sd, n }
    }

    pub fn covers(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

fn one_fold(data: &RegressionData, train: &[usize], test: &[usize], variance: VarianceSource) -> Result<[f64; 4], RegressionError> {
    let all: Vec<usize> = (0..COLUMN_NAMES.len()).collect();
    let (bx, by) = data.design(train, &BASELINE_COLUMNS);
    let (tx, ty) = data.design(train, &all);
    let base = fit_ols(&bx, &by, &RegressionData::names(&BASELINE_COLUMNS))?;
    let target = fit_ols(&tx, &ty, &RegressionData::names(&all))?;
    let (bxt, yt) = data.design(test, &BASELINE_COLUMNS);
    let (txt, _) = data.design(test, &all);
    let r2b = heldout_r2(&base, &bxt, &yt)?;
    let r2t = heldout_r2(&target, &txt, &yt)?;
    let dllh = delta_llh(&base, &bxt, &target, &txt, &yt, variance)?;
    Ok([r2t - r2b, dllh, r2b, r2t])
}

/// Fits baseline and target on all folds but one, for every fold and seed.
pub fn cross_validate(data: &RegressionData, plan: &FoldPlan, variance: VarianceSource) -> Result<CvScores, RegressionError> {
    let mut folds_of = vec![vec![0usize; data.rows.len()]; plan.seeds()];
    for (s, per_seed) in folds_of.iter_mut().enumerate() {
        for (i, row) in data.rows.iter().enumerate() {
            per_seed[i] = plan.fold_of(s, &row.key).ok_or_else(|| {
                RegressionError::Join(format!("row {} region {} is not in the fold plan", row.key.stimulus_id, row.key.roi_index))
            })?;
        }
    }
    let cells: Vec<(usize, usize)> = (0..plan.seeds()).flat_map(|s| (0..plan.folds()).map(move |f| (s, f))).collect();
    let results: Vec<[f64; 4]> = cells
        .par_iter()
        .map(|&(s, f)| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..data.rows.len()).partition(|&i| folds_of[s][i] == f);
            one_fold(data, &train, &test, variance)
                .map_err(|e| RegressionError::Fold { seed: s, fold: f, source: Box::new(e) })
        })
        .collect::<Result<_, _>>()?;
    Ok(CvScores {
        delta_r2: results.iter().map(|r| r[0]).collect(),
        delta_llh: results.iter().map(|r| r[1]).collect(),
        r2_baseline: results.iter().map(|r| r[2]).collect(),
        r2_target: results.iter().map(|r| r[3]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: usize) -> Vec<RowKey> {
        (0..n).map(|i| RowKey { stimulus_id: format!("s{}", i / 10), roi_index: i % 10 + 3 }).collect()
    }

    #[test]
    fn folds_are_equal_and_seeded() {
        let plan = FoldPlan::new(&keys(103), 10, 3, 7);
        for s in 0..3 {
            let mut sizes = [0usize; 10];
            for k in keys(103) {
                sizes[plan.fold_of(s, &k).unwrap()] += 1;
            }
            assert!(sizes.iter().all(|&c| c == 10 || c == 11), "{sizes:?}");
        }
        let again = FoldPlan::new(&keys(103), 10, 3, 7);
        let other = FoldPlan::new(&keys(103), 10, 3, 8);
        let k = &keys(103)[5];
        assert_eq!(plan.fold_of(1, k), again.fold_of(1, k));
        assert!(keys(103).iter().any(|k| plan.fold_of(0, k) != other.fold_of(0, k)));
        assert!(keys(103).iter().any(|k| plan.fold_of(0, k) != plan.fold_of(1, k)));
    }

    #[test]
    fn two_folds_of_four_rows() {
        let plan = FoldPlan::new(&keys(4), 2, 1, 0);
        let mut sizes = [0; 2];
        for k in keys(4) {
            sizes[plan.fold_of(0, &k).unwrap()] += 1;
        }
        assert_eq!(sizes, [2, 2]);
    }

    #[test]
    fn summary_interval() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0], 0.95);
        assert_eq!(s.mean, 2.5);
        let half = 1.959963984540054 * (5.0f64 / 3.0).sqrt() / 2.0;
        assert!((s.ci_high - 2.5 - half).abs() < 1e-9);
        assert!(s.covers(2.5) && !s.covers(5.0));
    }

    #[test]
    fn config_checks() {
        assert!(CvConfig::default().validate().is_ok());
        assert!(CvConfig { folds: 1, ..Default::default() }.validate().is_err());
        assert!(CvConfig { permutations: 10, ..Default::default() }.validate().is_err());
    }
}
