//! Surprisal of many focal areas of one stimulus from a single left-to-right
//! scoring pass.
//!
//! Every focal area's surprisal is a difference of two prefix log
//! probabilities of the same stimulus, so one scorer run that records the
//! prefix probability after each character serves all of them.

use rayon::prelude::*;

use super::{CharLm, MarginalError};
use crate::ingestion::SurprisalRecord;
use crate::lm::TokenLm;
use crate::math::rebase;
use crate::text::{focal_area, segment_rois, Convention, FocalArea, FocalSpec, Interval, RoiSequence, Stimulus};

/// Prefix log probabilities of every prefix of a text.
#[derive(Debug, Clone)]
pub struct PrefixProfile {
    /// `prefix[i]` is `ln p(first i characters)`.
    prefix: Vec<f64>,
    eos: Option<f64>,
    len: usize,
    failure: Option<String>,
}

impl PrefixProfile {
    /// Scores `text` once. A failure part way (state cap, model error) keeps
    /// the prefixes computed before it; queries past that point fail.
    pub fn compute<L: TokenLm + ?Sized>(charlm: &CharLm<'_, L>, text: &str, with_eos: bool) -> Self {
        let chars: Vec<char> = text.chars().collect();
        let mut scorer = charlm.scorer();
        let mut prefix = Vec::with_capacity(chars.len() + 1);
        prefix.push(0.0);
        for (i, &c) in chars.iter().enumerate() {
            if let Err(e) = scorer.push(c) {
                return Self { prefix, eos: None, len: chars.len(), failure: Some(format!("at character {}: {e}", i + 1)) };
            }
            prefix.push(scorer.prefix_logprob());
        }
        let (eos, failure) = if with_eos {
            match scorer.string_logprob() {
                Ok(s) => (Some(s - prefix[chars.len()]), None),
                Err(e) => (None, Some(format!("at end of string: {e}"))),
            }
        } else {
            (None, None)
        };
        Self { prefix, eos, len: chars.len(), failure }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn incomplete(&self, position: usize) -> MarginalError {
        MarginalError::Incomplete { position, message: self.failure.clone().unwrap_or_default() }
    }

    /// `ln` prefix probability of the first `n` characters.
    pub fn prefix_logprob(&self, n: usize) -> Result<f64, MarginalError> {
        self.prefix.get(n).copied().ok_or_else(|| self.incomplete(n))
    }

    /// `ln p(EOS | whole text)`, if requested at construction.
    pub fn eos_logprob(&self) -> Result<f64, MarginalError> {
        self.eos.ok_or_else(|| self.incomplete(self.len))
    }

    /// Surprisal in nats of `interval` given everything before it.
    pub fn surprisal(&self, interval: Interval, append_eos: bool) -> Result<f64, MarginalError> {
        let context = self.prefix_logprob(interval.start - 1)?;
        if context == f64::NEG_INFINITY {
            return Err(MarginalError::UndefinedConditional { context: format!("first {} characters", interval.start - 1) });
        }
        let mut s = context - self.prefix_logprob(interval.end - 1)?;
        if append_eos && interval.end == self.len + 1 {
            s -= self.eos_logprob()?;
        }
        Ok(s)
    }
}

/// One focal area's surprisal, or why there is none.
#[derive(Debug, Clone, PartialEq)]
pub enum SurprisalCell {
    Value { area: FocalArea, surprisal: f64 },
    /// The focal area is empty (dynamic size 0).
    Missing,
    Error(String),
}

impl SurprisalCell {
    pub fn status(&self) -> &'static str {
        match self {
            SurprisalCell::Value { .. } => "ok",
            SurprisalCell::Missing => "missing",
            SurprisalCell::Error(_) => "error",
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            SurprisalCell::Value { surprisal, .. } => Some(*surprisal),
            _ => None,
        }
    }

    pub fn area(&self) -> Option<FocalArea> {
        match self {
            SurprisalCell::Value { area, .. } => Some(*area),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurprisalRow {
    pub roi_index: usize,
    /// One cell per spec, in the table's spec order.
    pub cells: Vec<SurprisalCell>,
}

/// Surprisal of every focal spec at every region `k >= 2` of one stimulus
/// under one convention.
#[derive(Debug, Clone, PartialEq)]
pub struct SurprisalTable {
    pub rois: RoiSequence,
    pub specs: Vec<FocalSpec>,
    pub rows: Vec<SurprisalRow>,
    /// Full-region surprisal of every region, including the first; used for
    /// spillover predictors.
    pub roi_surprisal: Vec<SurprisalCell>,
}

impl SurprisalTable {
    pub fn stimulus(&self) -> &Stimulus {
        self.rois.stimulus()
    }

    pub fn convention(&self) -> Convention {
        self.rois.convention()
    }

    pub fn cell(&self, k: usize, spec: usize) -> Option<&SurprisalCell> {
        self.rows.get(k.checked_sub(2)?)?.cells.get(spec)
    }

    /// File rows ordered by region, then spec. The first region only has a
    /// row under `full`, which spillover predictors read.
    pub fn records(&self) -> Vec<SurprisalRecord> {
        let record = |k: usize, spec: FocalSpec, cell: &SurprisalCell| SurprisalRecord {
            stimulus_id: self.stimulus().id().to_string(),
            roi_index: k,
            convention: self.convention(),
            focal_spec: spec,
            focal_yield: if k == 1 {
                self.rois.region_yield(1).unwrap_or_default()
            } else {
                focal_area(&self.rois, k, spec).ok().flatten().map(|a| self.stimulus().slice(a.interval)).unwrap_or_default()
            },
            surprisal: cell.value(),
            status: cell.status().to_string(),
        };
        let mut out = Vec::with_capacity(self.rows.len() * self.specs.len() + 1);
        if self.specs.contains(&FocalSpec::FullRoi) {
            if let Some(first) = self.roi_surprisal.first() {
                out.push(record(1, FocalSpec::FullRoi, first));
            }
        }
        for row in &self.rows {
            for (&spec, cell) in self.specs.iter().zip(&row.cells) {
                out.push(record(row.roi_index, spec, cell));
            }
        }
        out
    }
}

fn cell(profile: &PrefixProfile, area: FocalArea, append_eos: bool, base: f64) -> SurprisalCell {
    match profile.surprisal(area.interval, append_eos) {
        Ok(s) => SurprisalCell::Value { area, surprisal: rebase(s, base) },
        Err(e) => SurprisalCell::Error(e.to_string()),
    }
}

fn table_from_profile(
    profile: &PrefixProfile,
    rois: &RoiSequence,
    specs: &[FocalSpec],
    append_eos: bool,
    base: f64,
) -> SurprisalTable {
    let rows = (2..=rois.len())
        .map(|k| SurprisalRow {
            roi_index: k,
            cells: specs
                .iter()
                .map(|&spec| match focal_area(rois, k, spec) {
                    Ok(Some(area)) => cell(profile, area, append_eos, base),
                    Ok(None) => SurprisalCell::Missing,
                    Err(e) => SurprisalCell::Error(e.to_string()),
                })
                .collect(),
        })
        .collect();
    let roi_surprisal = rois
        .regions()
        .iter()
        .enumerate()
        .map(|(i, &interval)| cell(profile, FocalArea { interval, roi_index: i + 1 }, append_eos, base))
        .collect();
    SurprisalTable { rois: rois.clone(), specs: specs.to_vec(), rows, roi_surprisal }
}

/// Surprisal table for one segmented stimulus. Per-cell failures are
/// recorded in the cell; the call itself does not fail.
pub fn surprisal_batch<L: TokenLm + ?Sized>(
    charlm: &CharLm<'_, L>,
    rois: &RoiSequence,
    specs: &[FocalSpec],
    append_eos: bool,
) -> SurprisalTable {
    let profile = PrefixProfile::compute(charlm, rois.stimulus().text(), append_eos);
    table_from_profile(&profile, rois, specs, append_eos, charlm.log_base())
}

/// Tables for every stimulus under every convention, stimulus-major in
/// input order. Each stimulus is scored once and shared by its conventions;
/// stimuli are processed in parallel.
pub fn surprisal_corpus<L: TokenLm + ?Sized>(
    charlm: &CharLm<'_, L>,
    stimuli: &[Stimulus],
    conventions: &[Convention],
    specs: &[FocalSpec],
    append_eos: bool,
) -> Result<Vec<SurprisalTable>, MarginalError> {
    let per_stimulus: Vec<Result<Vec<SurprisalTable>, MarginalError>> = stimuli
        .par_iter()
        .map(|stimulus| {
            let profile = PrefixProfile::compute(charlm, stimulus.text(), append_eos);
            conventions
                .iter()
                .map(|&conv| {
                    let rois = segment_rois(stimulus, conv)?;
                    Ok(table_from_profile(&profile, &rois, specs, append_eos, charlm.log_base()))
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(stimuli.len() * conventions.len());
    for tables in per_stimulus {
        out.extend(tables?);
    }
    Ok(out)
}
