//! Randomized comparison of beam summing against exact enumeration.

use rand::Rng;

use super::{exact, MarginalError, PrefixScorer};
use crate::codec::Codec;
use crate::lm::TokenLm;
use crate::rng::substream;

/// Signature of a beam prefix scorer: `(codec, lm, text, width) -> ln p`.
pub type BeamFn<L> = dyn Fn(&Codec, &L, &str, usize) -> Result<f64, MarginalError> + Sync;

/// The production beam.
pub fn beam_prefix_logprob<L: TokenLm + ?Sized>(codec: &Codec, lm: &L, text: &str, width: usize) -> Result<f64, MarginalError> {
    let mut s = PrefixScorer::new(codec, lm, width, usize::MAX);
    s.push_str(text)?;
    Ok(s.prefix_logprob())
}

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub trials: usize,
    pub max_len: usize,
    /// Widths `1..=max_width` are checked for monotonicity.
    pub max_width: usize,
    /// Relative tolerance for equality with the exact value.
    pub tolerance: f64,
    pub state_cap: usize,
    /// Root seed; queries come from its `oracle-check` stream.
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { trials: 1000, max_len: 8, max_width: 8, tolerance: 1e-9, state_cap: super::DEFAULT_STATE_CAP, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Unbounded beam differs from exact.
    Unbounded,
    /// Some width gives more than exact.
    ExceedsExact,
    /// Widening the beam lowered the value.
    NotMonotone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub query: String,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub trials: usize,
    /// Queries skipped because exact enumeration hit the state cap.
    pub skipped: usize,
    pub violations: Vec<Violation>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A random string over the codec's characters of length `1..=max_len`.
pub fn random_query(codec: &Codec, rng: &mut impl Rng, max_len: usize) -> String {
    let chars = codec.character_set();
    let n = rng.random_range(1..=max_len.max(1));
    (0..n).map(|_| chars[rng.random_range(0..chars.len())]).collect()
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // compare probabilities, not logs
    let (pa, pb) = (a.exp(), b.exp());
    (pa - pb).abs() / pa.abs().max(pb.abs())
}

pub fn oracle_check<L: TokenLm + ?Sized>(codec: &Codec, lm: &L, cfg: &OracleConfig, beam: &BeamFn<L>) -> Result<OracleReport, MarginalError> {
    let mut rng = substream(cfg.seed, "oracle-check");
    let mut report = OracleReport { trials: cfg.trials, ..Default::default() };
    for _ in 0..cfg.trials {
        let query = random_query(codec, &mut rng, cfg.max_len);
        let exact = match exact::prefix_logprob(codec, lm, &query, cfg.state_cap) {
            Ok(v) => v,
            Err(MarginalError::Explosion { .. }) => {
                report.skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let full = beam(codec, lm, &query, usize::MAX)?;
        if rel_diff(full, exact) > cfg.tolerance {
            report.violations.push(Violation {
                query: query.clone(),
                kind: ViolationKind::Unbounded,
                detail: format!("unbounded beam {full} vs exact {exact}"),
            });
        }
        let mut prev: Option<(usize, f64)> = None;
        for width in 1..=cfg.max_width {
            let v = beam(codec, lm, &query, width)?;
            if v > exact && rel_diff(v, exact) > cfg.tolerance {
                report.violations.push(Violation {
                    query: query.clone(),
                    kind: ViolationKind::ExceedsExact,
                    detail: format!("width {width}: {v} > exact {exact}"),
                });
            }
            if let Some((pw, pv)) = prev {
                if v < pv && rel_diff(v, pv) > cfg.tolerance {
                    report.violations.push(Violation {
                        query: query.clone(),
                        kind: ViolationKind::NotMonotone,
                        detail: format!("width {width}: {v} < width {pw}: {pv}"),
                    });
                }
            }
            prev = Some((width, v));
        }
    }
    Ok(report)
}
