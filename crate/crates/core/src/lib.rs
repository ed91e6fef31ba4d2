//! Character-level surprisal from token-level language models.
//!
//! A token language model defines a distribution over token strings; the
//! [`marginal`] module sums over every tokenization of a character string
//! to recover character-level prefix probabilities, conditionals and
//! surprisal of arbitrary focal areas of a stimulus. [`regression`]
//! evaluates those surprisals as predictors of reading measurements.

pub mod codec;
pub mod text;
pub mod lm;
pub mod math;
pub mod marginal;
pub mod ingestion;
pub mod rng;
pub mod regression;
