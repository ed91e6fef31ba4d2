//! Full regression protocol over measures, conventions and focal specs.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use super::cv::{cross_validate, CvConfig, CvScores, FoldPlan, Summary};
use super::ols::fit_ols;
use super::permutation::{permutation_test, Alternative};
use super::predictors::{build_rows, Exclusions, RegressionData, RowKey, SurprisalIndex, COLUMN_NAMES};
use super::RegressionError;
use crate::ingestion::{DatasetBundle, FrequencyTable, Measure, SurprisalRecord};
use crate::rng::substream;
use crate::text::{Convention, FocalSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Echo of everything that determines a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub cv: CvConfig,
    pub measures: Vec<Measure>,
    pub conventions: Vec<Convention>,
    pub specs: Vec<FocalSpec>,
    /// Caller-supplied context such as input paths.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficients {
    pub intercept: f64,
    pub slopes: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecResult {
    pub measure: Measure,
    pub convention: Convention,
    pub spec: FocalSpec,
    pub exclusions: Exclusions,
    /// 1 is the highest mean ΔR² within the measure and convention.
    pub rank: Option<usize>,
    pub delta_r2: Option<Summary>,
    pub delta_llh: Option<Summary>,
    /// One-sided test of mean ΔR² > 0.
    pub p_value: Option<f64>,
    pub r2_baseline: Option<f64>,
    pub r2_target: Option<f64>,
    /// Target model fit on every analyzable row.
    pub target_fit: Option<Coefficients>,
    pub error: Option<String>,
    #[serde(skip)]
    pub scores: Option<CvScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseResult {
    pub measure: Measure,
    pub convention: Convention,
    pub a: FocalSpec,
    pub b: FocalSpec,
    /// Two-sided test on paired per-fold ΔR² differences.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub version: String,
    pub config: ReportConfig,
    pub results: Vec<SpecResult>,
    pub pairwise: Vec<PairwiseResult>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn evaluate(
    data: RegressionData,
    plan: &FoldPlan,
    cfg: &CvConfig,
    measure: Measure,
    convention: Convention,
    spec: FocalSpec,
) -> SpecResult {
    let mut out = SpecResult {
        measure,
        convention,
        spec,
        exclusions: data.exclusions,
        rank: None,
        delta_r2: None,
        delta_llh: None,
        p_value: None,
        r2_baseline: None,
        r2_target: None,
        target_fit: None,
        error: None,
        scores: None,
    };
    let run = || -> Result<(CvScores, Coefficients, f64), RegressionError> {
        let scores = cross_validate(&data, plan, cfg.variance)?;
        let all: Vec<usize> = (0..COLUMN_NAMES.len()).collect();
        let idx: Vec<usize> = (0..data.rows.len()).collect();
        let (x, y) = data.design(&idx, &all);
        let fit = fit_ols(&x, &y, &RegressionData::names(&all))?;
        let slopes = COLUMN_NAMES.iter().map(|n| n.to_string()).zip(fit.coefficients.iter().copied()).collect();
        let mut rng = substream(cfg.seed, &format!("permutations/{measure}/{convention}/{spec}"));
        let p = permutation_test(&scores.delta_r2, None, Alternative::Greater, cfg.permutations, &mut rng)?;
        Ok((scores, Coefficients { intercept: fit.intercept, slopes }, p))
    };
    match run() {
        Ok((scores, coef, p)) => {
            out.delta_r2 = Some(Summary::of(&scores.delta_r2, cfg.confidence));
            out.delta_llh = Some(Summary::of(&scores.delta_llh, cfg.confidence));
            out.r2_baseline = Some(mean(&scores.r2_baseline));
            out.r2_target = Some(mean(&scores.r2_target));
            out.p_value = Some(p);
            out.target_fit = Some(coef);
            out.scores = Some(scores);
        }
        Err(e) => out.error = Some(format!("{measure} {convention} {spec}: {e}")),
    }
    out
}

/// Runs the protocol for every `(measure, convention, spec)`. Failures of a
/// single cell are recorded in its result; join errors abort.
pub fn run_regression(
    bundle: &DatasetBundle,
    surprisal: &[SurprisalRecord],
    freq: &FrequencyTable,
    config: ReportConfig,
) -> Result<RegressionReport, RegressionError> {
    let cfg = &config.cv;
    cfg.validate()?;
    let index = SurprisalIndex::new(surprisal)?;

    // every row with two predecessors, whatever the spec, shares one plan
    let universe: Vec<RowKey> = bundle
        .analyzable()
        .filter(|m| m.roi_index >= 3)
        .map(|m| RowKey { stimulus_id: m.stimulus_id.clone(), roi_index: m.roi_index })
        .collect();
    let plan = FoldPlan::new(&universe, cfg.folds, cfg.seeds, cfg.seed);

    let mut jobs = Vec::new();
    for &measure in &config.measures {
        for &convention in &config.conventions {
            for &spec in &config.specs {
                jobs.push((measure, convention, spec, build_rows(bundle, measure, convention, spec, &index, freq)?));
            }
        }
    }
    let mut results: Vec<SpecResult> =
        jobs.into_par_iter().map(|(m, c, s, data)| evaluate(data, &plan, cfg, m, c, s)).collect();

    let mut pairwise_jobs = Vec::new();
    for group in results.chunk_by(|a, b| a.measure == b.measure && a.convention == b.convention) {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                if let (Some(sa), Some(sb)) = (&a.scores, &b.scores) {
                    pairwise_jobs.push((a.measure, a.convention, a.spec, b.spec, sa, sb));
                }
            }
        }
    }
    let pairwise = pairwise_jobs
        .into_par_iter()
        .map(|(measure, convention, a, b, sa, sb)| {
            let mut rng = substream(cfg.seed, &format!("permutations/{measure}/{convention}/{a}/{b}"));
            let p = permutation_test(&sa.delta_r2, Some(&sb.delta_r2), Alternative::TwoSided, cfg.permutations, &mut rng)?;
            Ok(PairwiseResult { measure, convention, a, b, p_value: p })
        })
        .collect::<Result<Vec<_>, RegressionError>>()?;

    let group_starts: Vec<usize> = (0..results.len())
        .filter(|&i| i == 0 || (results[i].measure, results[i].convention) != (results[i - 1].measure, results[i - 1].convention))
        .chain([results.len()])
        .collect();
    for w in group_starts.windows(2) {
        let group = &mut results[w[0]..w[1]];
        let mut order: Vec<usize> = (0..group.len()).filter(|&i| group[i].delta_r2.is_some()).collect();
        order.sort_by(|&i, &j| group[j].delta_r2.unwrap().mean.total_cmp(&group[i].delta_r2.unwrap().mean).then(i.cmp(&j)));
        for (r, i) in order.into_iter().enumerate() {
            group[i].rank = Some(r + 1);
        }
    }

    Ok(RegressionReport { version: VERSION.to_string(), config, results, pairwise })
}

impl RegressionReport {
    pub fn errors(&self) -> impl Iterator<Item = &str> {
        self.results.iter().filter_map(|r| r.error.as_deref())
    }

    pub fn result(&self, measure: Measure, convention: Convention, spec: FocalSpec) -> Option<&SpecResult> {
        self.results.iter().find(|r| r.measure == measure && r.convention == convention && r.spec == spec)
    }

    pub fn pairwise_p(&self, measure: Measure, convention: Convention, a: FocalSpec, b: FocalSpec) -> Option<f64> {
        self.pairwise
            .iter()
            .find(|p| p.measure == measure && p.convention == convention && ((p.a, p.b) == (a, b) || (p.a, p.b) == (b, a)))
            .map(|p| p.p_value)
    }

    /// Nested as measure → convention → spec → metrics.
    pub fn to_json(&self) -> Value {
        let mut results = Map::new();
        for r in &self.results {
            let mut metrics = serde_json::to_value(r).expect("result serializes");
            let obj = metrics.as_object_mut().unwrap();
            for k in ["measure", "convention", "spec"] {
                obj.remove(k);
            }
            let pairs: Map<String, Value> = self
                .pairwise
                .iter()
                .filter(|p| p.measure == r.measure && p.convention == r.convention && (p.a == r.spec || p.b == r.spec))
                .map(|p| (if p.a == r.spec { p.b } else { p.a }.to_string(), json!(p.p_value)))
                .collect();
            obj.insert("pairwise_p".into(), Value::Object(pairs));
            let by_measure = results.entry(r.measure.to_string()).or_insert_with(|| json!({}));
            let by_conv = by_measure.as_object_mut().unwrap().entry(r.convention.to_string()).or_insert_with(|| json!({}));
            by_conv.as_object_mut().unwrap().insert(r.spec.to_string(), metrics);
        }
        json!({ "version": self.version, "config": self.config, "results": results })
    }

    /// One row per result. The first line is a `#` comment echoing the
    /// version and configuration.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), csv::Error> {
        let echo = serde_json::to_string(&json!({ "version": self.version, "config": self.config })).expect("config serializes");
        writeln!(out, "# {echo}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "measure",
            "convention",
            "focal_spec",
            "rank",
            "delta_r2_mean",
            "delta_r2_ci_low",
            "delta_r2_ci_high",
            "delta_llh_mean",
            "delta_llh_ci_low",
            "delta_llh_ci_high",
            "p_value",
            "loaded",
            "first_roi",
            "no_predecessors",
            "missing_focal",
            "analyzable",
            "error",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.results {
            let e = r.exclusions;
            w.write_record([
                r.measure.to_string(),
                r.convention.to_string(),
                r.spec.to_string(),
                r.rank.map(|x| x.to_string()).unwrap_or_default(),
                opt(r.delta_r2.map(|s| s.mean)),
                opt(r.delta_r2.map(|s| s.ci_low)),
                opt(r.delta_r2.map(|s| s.ci_high)),
                opt(r.delta_llh.map(|s| s.mean)),
                opt(r.delta_llh.map(|s| s.ci_low)),
                opt(r.delta_llh.map(|s| s.ci_high)),
                opt(r.p_value),
                e.loaded.to_string(),
                e.first_roi.to_string(),
                e.no_predecessors.to_string(),
                e.missing_focal.to_string(),
                e.analyzable.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Tidy plot data: one row per spec, convention and metric.
    pub fn write_plot_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["measure", "convention", "focal_spec", "metric", "mean", "ci_low", "ci_high", "p_value"])?;
        for r in &self.results {
            for (metric, s) in [("delta_r2", r.delta_r2), ("delta_llh", r.delta_llh)] {
                let Some(s) = s else { continue };
                let p = if metric == "delta_r2" { r.p_value.map(|p| p.to_string()).unwrap_or_default() } else { String::new() };
                w.write_record([
                    r.measure.to_string(),
                    r.convention.to_string(),
                    r.spec.to_string(),
                    metric.to_string(),
                    s.mean.to_string(),
                    s.ci_low.to_string(),
                    s.ci_high.to_string(),
                    p,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
