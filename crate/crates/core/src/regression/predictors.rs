//! Predictor rows joined from measurements, surprisal tables and word
//! frequencies.

use std::collections::HashMap;

use serde::Serialize;

use super::RegressionError;
use crate::ingestion::{DatasetBundle, FrequencyTable, Measure, SurprisalRecord};
use crate::text::{Convention, FocalSpec, RoiSequence};

/// Design columns in order. The baseline uses the first two.
pub const COLUMN_NAMES: [&str; 9] = [
    "length",
    "zipf",
    "focal_surprisal",
    "prev1_length",
    "prev1_zipf",
    "prev1_surprisal",
    "prev2_length",
    "prev2_zipf",
    "prev2_surprisal",
];

pub const BASELINE_COLUMNS: [usize; 2] = [0, 1];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RowKey {
    pub stimulus_id: String,
    pub roi_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorRow {
    pub key: RowKey,
    pub response: f64,
    /// Values for [`COLUMN_NAMES`].
    pub features: [f64; 9],
}

/// Where the loaded rows of one measure went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Exclusions {
    pub loaded: usize,
    pub first_roi: usize,
    pub no_predecessors: usize,
    /// Focal area empty, or its surprisal could not be computed.
    pub missing_focal: usize,
    pub analyzable: usize,
}

impl Exclusions {
    pub fn balanced(&self) -> bool {
        self.loaded == self.first_roi + self.no_predecessors + self.missing_focal + self.analyzable
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub rows: Vec<PredictorRow>,
    pub exclusions: Exclusions,
}

impl RegressionData {
    pub fn names(columns: &[usize]) -> Vec<String> {
        columns.iter().map(|&c| COLUMN_NAMES[c].to_string()).collect()
    }

    /// Row-major design restricted to `columns`, over the rows in `idx`.
    pub fn design(&self, idx: &[usize], columns: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x = idx.iter().map(|&i| columns.iter().map(|&c| self.rows[i].features[c]).collect()).collect();
        let y = idx.iter().map(|&i| self.rows[i].response).collect();
        (x, y)
    }
}

/// Surprisal records keyed for joining; `None` marks a non-ok cell.
#[derive(Debug, Clone, Default)]
pub struct SurprisalIndex {
    cells: HashMap<(String, usize, Convention, FocalSpec), Option<f64>>,
}

impl SurprisalIndex {
    pub fn new(records: &[SurprisalRecord]) -> Result<Self, RegressionError> {
        let mut cells = HashMap::with_capacity(records.len());
        for r in records {
            let value = if r.status == "ok" { r.surprisal } else { None };
            let key = (r.stimulus_id.clone(), r.roi_index, r.convention, r.focal_spec);
            if cells.insert(key, value).is_some() {
                return Err(RegressionError::Join(format!(
                    "duplicate surprisal row for {} region {} {} {}",
                    r.stimulus_id, r.roi_index, r.convention, r.focal_spec
                )));
            }
        }
        Ok(Self { cells })
    }

    pub fn get(&self, stimulus_id: &str, roi_index: usize, convention: Convention, spec: FocalSpec) -> Option<Option<f64>> {
        self.cells.get(&(stimulus_id.to_string(), roi_index, convention, spec)).copied()
    }
}

fn lexical(rois: &RoiSequence, k: usize, freq: &FrequencyTable) -> Result<[f64; 2], RegressionError> {
    let yield_ = rois.region_yield(k).map_err(|e| RegressionError::Join(e.to_string()))?;
    Ok([yield_.chars().count() as f64, freq.zipf(&yield_)])
}

fn spillover(
    rois: &RoiSequence,
    k: usize,
    freq: &FrequencyTable,
    surprisal: &SurprisalIndex,
) -> Result<[f64; 3], RegressionError> {
    let id = rois.stimulus().id();
    let [len, zipf] = lexical(rois, k, freq)?;
    let full = surprisal.get(id, k, rois.convention(), FocalSpec::FullRoi).flatten().ok_or_else(|| {
        RegressionError::Join(format!(
            "no full-region surprisal for `{id}` region {k} ({}); spillover needs `full` in the surprisal specs",
            rois.convention()
        ))
    })?;
    Ok([len, zipf, full])
}

/// Rows for one `(measure, convention, spec)` cell, in measurement order.
pub fn build_rows(
    bundle: &DatasetBundle,
    measure: Measure,
    convention: Convention,
    spec: FocalSpec,
    surprisal: &SurprisalIndex,
    freq: &FrequencyTable,
) -> Result<RegressionData, RegressionError> {
    let seqs = bundle
        .rois
        .get(&convention)
        .ok_or_else(|| RegressionError::Join(format!("dataset was not segmented under the {convention} convention")))?;
    let by_id: HashMap<&str, &RoiSequence> = seqs.iter().map(|s| (s.stimulus().id(), s)).collect();
    let mut ex = Exclusions::default();
    let mut rows = Vec::new();
    for m in bundle.measurements.iter().filter(|m| m.measure == measure) {
        ex.loaded += 1;
        if m.excluded || m.roi_index == 1 {
            ex.first_roi += 1;
            continue;
        }
        if m.roi_index < 3 {
            ex.no_predecessors += 1;
            continue;
        }
        let rois = by_id
            .get(m.stimulus_id.as_str())
            .ok_or_else(|| RegressionError::Join(format!("row {}: unknown stimulus `{}`", m.row, m.stimulus_id)))?;
        let Some(focal) = surprisal.get(&m.stimulus_id, m.roi_index, convention, spec).flatten() else {
            ex.missing_focal += 1;
            continue;
        };
        let cur = lexical(rois, m.roi_index, freq)?;
        let p1 = spillover(rois, m.roi_index - 1, freq, surprisal)?;
        let p2 = spillover(rois, m.roi_index - 2, freq, surprisal)?;
        rows.push(PredictorRow {
            key: RowKey { stimulus_id: m.stimulus_id.clone(), roi_index: m.roi_index },
            response: m.value,
            features: [cur[0], cur[1], focal, p1[0], p1[1], p1[2], p2[0], p2[1], p2[2]],
        });
    }
    ex.analyzable = rows.len();
    Ok(RegressionData { rows, exclusions: ex })
}
