//! Document-grounded conversational agent harness.
//!
//! The crate is organised around the pipeline a single chat turn goes through:
//!
//! * [`gateway`] talks to an Ollama-compatible generation backend (or a
//!   deterministic mock),
//! * [`speechact`] labels the user's utterance with one of Searle's five
//!   illocutionary categories,
//! * [`knowledge`] stores and segments the grounding documents,
//! * [`dialogue`] builds the instruction prompt and runs one exchange,
//! * [`metrics`] scores a response against its grounding document,
//! * [`experiment`] runs the with/without speech-act A/B comparison and
//!   derives the 1/0/S/F comparison grids.
//!
//! The scoring math in [`metrics`] is generic over the float type; the
//! aliases below pin the common instantiations.

pub mod dialogue;
pub mod experiment;
pub mod gateway;
mod hash;
#[cfg(test)]
mod testutil;
pub mod knowledge;
pub mod metrics;
pub mod scalar;
pub mod speechact;

pub use scalar::Scalar;

/// Precision/recall/F1 triple in double precision.
pub type Prf64 = metrics::Prf<f64>;
/// Precision/recall/F1 triple in single precision.
pub type Prf32 = metrics::Prf<f32>;
/// Add-k n-gram model with double-precision smoothing.
pub type NgramModel64 = metrics::NgramModel<f64>;
/// Add-k n-gram model with single-precision smoothing.
pub type NgramModel32 = metrics::NgramModel<f32>;
/// Synonym table used by METEOR's third matching stage.
pub type SynonymLexicon = metrics::meteor::SynonymLexicon;
