//! Evaluates language models as psycholinguistic models.
//!
//! The pipeline computes three families of metrics for each language model:
//! perplexity (and its vocabulary-normalized variant) over the model's own
//! tokenization, the predictability norm correlation (PNC) against human
//! Cloze-derived surprisals, and the log-likelihood gain of a penalized
//! spline regression of reading times when the model's surprisals are added
//! to a surprisal-free baseline.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod gam;
pub mod metrics;
pub mod ngram;
pub mod surprisal;

pub use error::{Error, Result};
