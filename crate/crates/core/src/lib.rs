//! Edit-based discrete flow matching over token sequences.
//!
//! A rate model learns to transport a template sequence towards related
//! sequences through substitutions, insertions and deletions. Samples are
//! drawn from the resulting continuous-time Markov chain with an event-driven
//! sampler, and generated sets are scored against holdout sets.

pub mod autodiff;
pub mod baselines;
pub mod benchmark;
pub mod error;
pub mod flowpath;
pub mod metrics;
pub mod oracle;
pub mod ratemodel;
pub mod rates;
pub mod sampler;
pub mod seq;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use flowpath::Schedule;
pub use ratemodel::{ModelConfig, ModelParams, RateField, RateModel};
pub use rates::RateTable;
pub use seq::{AlignedPair, Alphabet, EditLabel, EditOp, ScoringScheme, Sequence};
