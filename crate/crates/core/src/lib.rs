//! Learning deterministic labeled Markov decision processes from alternating
//! input/output traces, and checking learned models against known ones.
//!
//! The pipeline is: build or load a model ([`model`], [`benchmarks`]), sample
//! traces from it ([`tracegen`]), organise them in a frequency prefix tree
//! ([`fpta`]), merge compatible tree nodes into a deterministic model
//! ([`learner`]) and compare reachability probabilities, expected rewards and
//! optimal actions ([`analysis`]). [`experiment`] strings the stages together.

pub mod error;
pub mod model;

pub use error::{Error, Result};
pub use model::{Alphabet, IoString, Lmdp, MemorylessScheduler, StateId, StateRecord, Successor};
pub mod fpta;
pub mod learner;
pub mod tracegen;
pub mod analysis;
pub mod benchmarks;
pub mod experiment;
