//! Speaker verification in emotional speech by a three-stage HMM cascade:
//! gender identification, gender-dependent emotion identification, then
//! gender- and emotion-dependent speaker verification.
//!
//! The crate also ships a deterministic synthetic emotional-speech corpus
//! generator and an experiment harness that compares the cascade with
//! one-stage and two-stage baselines by equal error rate.

pub mod audio;
pub mod cascade;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod hmm;
pub mod math;
pub mod par;
pub mod pipeline;
pub mod registry;

pub use error::{Error, Result};
pub use par::Parallelism;
