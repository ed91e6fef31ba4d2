//! Character-level language model obtained by summing a token-level model
//! over tokenizations.
//!
//! Two methods share one interface: [`Method::Exact`] enumerates every
//! tokenization (bounded by a state cap), [`Method::Beam`] keeps the most
//! probable partial tokenizations per character position and returns a
//! lower bound on every prefix probability.

mod batch;
pub mod exact;
pub mod oracle;
mod scorer;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::codec::{Codec, TokenId};
use crate::lm::{LmError, TokenLm};
use crate::math::rebase;
use crate::text::{FocalArea, Interval, Stimulus, TextError};

pub use batch::{surprisal_batch, surprisal_corpus, PrefixProfile, SurprisalCell, SurprisalRow, SurprisalTable};
pub use scorer::{CoverState, PrefixScorer};

/// Default bound on enumerated states in exact mode.
pub const DEFAULT_STATE_CAP: usize = 100_000;

#[derive(Debug, Error)]
pub enum MarginalError {
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("exact enumeration exceeded {cap} states; use the beam method")]
    Explosion { cap: usize },
    #[error("conditional undefined: context {context:?} has zero prefix probability")]
    UndefinedConditional { context: String },
    #[error("codec has {codec} tokens but the language model has {lm}")]
    VocabMismatch { codec: usize, lm: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("scoring stopped before position {position}: {message}")]
    Incomplete { position: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub width: usize,
}

impl BeamConfig {
    pub fn new(width: usize) -> Result<Self, MarginalError> {
        if width == 0 {
            return Err(MarginalError::InvalidParameter("beam width must be >= 1".into()));
        }
        Ok(Self { width })
    }

    /// No pruning at all.
    pub fn unbounded() -> Self {
        Self { width: usize::MAX }
    }
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { width: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Beam(BeamConfig),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Exact => f.write_str("exact"),
            Method::Beam(b) => write!(f, "beam:{}", b.width),
        }
    }
}

impl FromStr for Method {
    type Err = MarginalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Method::Exact),
            "beam" => Ok(Method::Beam(BeamConfig::default())),
            _ => match s.strip_prefix("beam:").and_then(|w| w.parse().ok()) {
                Some(w) => Ok(Method::Beam(BeamConfig::new(w)?)),
                None => Err(MarginalError::InvalidParameter(format!("unknown method `{s}`"))),
            },
        }
    }
}

/// Marginalized character-level view of a token model.
pub struct CharLm<'a, L: ?Sized = dyn TokenLm + 'a> {
    codec: &'a Codec,
    lm: &'a L,
    method: Method,
    state_cap: usize,
    log_base: f64,
}

impl<'a, L: TokenLm + ?Sized> CharLm<'a, L> {
    pub fn new(codec: &'a Codec, lm: &'a L, method: Method) -> Result<Self, MarginalError> {
        if codec.vocab_size() != lm.vocab_size() {
            return Err(MarginalError::VocabMismatch { codec: codec.vocab_size(), lm: lm.vocab_size() });
        }
        Ok(Self { codec, lm, method, state_cap: DEFAULT_STATE_CAP, log_base: std::f64::consts::E })
    }

    pub fn with_state_cap(mut self, cap: usize) -> Self {
        self.state_cap = cap;
        self
    }

    /// Base used when reporting surprisal; natural log by default.
    pub fn with_log_base(mut self, base: f64) -> Self {
        self.log_base = base;
        self
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn codec(&self) -> &'a Codec {
        self.codec
    }

    pub fn lm(&self) -> &'a L {
        self.lm
    }

    /// A fresh incremental scorer for this model's method.
    pub fn scorer(&self) -> PrefixScorer<'a, L> {
        match self.method {
            Method::Exact => PrefixScorer::new(self.codec, self.lm, usize::MAX, self.state_cap),
            Method::Beam(b) => PrefixScorer::new(self.codec, self.lm, b.width, usize::MAX),
        }
    }

    pub fn prefix_cover_exact(&self, text: &str) -> Result<Vec<Vec<TokenId>>, MarginalError> {
        exact::prefix_cover(self.codec, text, self.state_cap)
    }

    /// `ln` of the probability that a string from the model starts with `text`.
    pub fn prefix_logprob(&self, text: &str) -> Result<f64, MarginalError> {
        match self.method {
            Method::Exact => exact::prefix_logprob(self.codec, self.lm, text, self.state_cap),
            Method::Beam(_) => {
                let mut s = self.scorer();
                s.push_str(text)?;
                Ok(s.prefix_logprob())
            }
        }
    }

    pub fn prefix_prob(&self, text: &str) -> Result<f64, MarginalError> {
        self.prefix_logprob(text).map(f64::exp)
    }

    /// `ln p(continuation | context)` as a ratio of prefix probabilities.
    /// The beam method extends the context's states rather than rescoring.
    pub fn conditional_logprob(&self, continuation: &str, context: &str) -> Result<f64, MarginalError> {
        let (num, den) = match self.method {
            Method::Exact => (
                exact::prefix_logprob(self.codec, self.lm, &format!("{context}{continuation}"), self.state_cap)?,
                exact::prefix_logprob(self.codec, self.lm, context, self.state_cap)?,
            ),
            Method::Beam(_) => {
                let mut s = self.scorer();
                s.push_str(context)?;
                let den = s.prefix_logprob();
                s.push_str(continuation)?;
                (s.prefix_logprob(), den)
            }
        };
        if den == f64::NEG_INFINITY {
            return Err(MarginalError::UndefinedConditional { context: context.to_string() });
        }
        if continuation.is_empty() {
            return Ok(0.0);
        }
        Ok(num - den)
    }

    pub fn conditional_prob(&self, continuation: &str, context: &str) -> Result<f64, MarginalError> {
        self.conditional_logprob(continuation, context).map(f64::exp)
    }

    /// `ln` of the probability of exactly `text`.
    pub fn string_logprob(&self, text: &str) -> Result<f64, MarginalError> {
        match self.method {
            Method::Exact => exact::string_logprob(self.codec, self.lm, text, self.state_cap),
            Method::Beam(_) => {
                let mut s = self.scorer();
                s.push_str(text)?;
                s.string_logprob()
            }
        }
    }

    /// `ln p(EOS | text)`: string probability over prefix probability.
    pub fn eos_logprob(&self, text: &str) -> Result<f64, MarginalError> {
        let (num, den) = match self.method {
            Method::Exact => (
                exact::string_logprob(self.codec, self.lm, text, self.state_cap)?,
                exact::prefix_logprob(self.codec, self.lm, text, self.state_cap)?,
            ),
            Method::Beam(_) => {
                let mut s = self.scorer();
                s.push_str(text)?;
                (s.string_logprob()?, s.prefix_logprob())
            }
        };
        if den == f64::NEG_INFINITY {
            return Err(MarginalError::UndefinedConditional { context: text.to_string() });
        }
        Ok(num - den)
    }

    pub fn eos_prob(&self, text: &str) -> Result<f64, MarginalError> {
        self.eos_logprob(text).map(f64::exp)
    }

    /// Surprisal of a focal area given the full stimulus prefix before it,
    /// in the configured log base. With `append_eos`, a focal area that
    /// ends the stimulus also pays `-log p(EOS | stimulus)`.
    pub fn surprisal(&self, stimulus: &Stimulus, focal: &FocalArea, append_eos: bool) -> Result<f64, MarginalError> {
        let chars = stimulus.chars();
        let Interval { start, end } = focal.interval;
        if start < 1 || end <= start || end > chars.len() + 1 {
            return Err(TextError::BadInterval { start, end, len: chars.len() }.into());
        }
        let mut s = self.scorer();
        for &c in &chars[..start - 1] {
            s.push(c)?;
        }
        let den = s.prefix_logprob();
        if den == f64::NEG_INFINITY {
            return Err(MarginalError::UndefinedConditional { context: stimulus.prefix_before(start) });
        }
        for &c in &chars[start - 1..end - 1] {
            s.push(c)?;
        }
        let mut nats = den - s.prefix_logprob();
        if append_eos && end == chars.len() + 1 {
            nats -= s.string_logprob()? - s.prefix_logprob();
        }
        Ok(rebase(nats, self.log_base))
    }

    pub(crate) fn log_base(&self) -> f64 {
        self.log_base
    }
}

#[cfg(test)]
mod tests;
