//! Universal classification of pairs of finite individual sequences.
//!
//! Given two sequences `X` and `Y` drawn from unknown finite-alphabet
//! stationary sources, decide whether they were emitted by the same source.
//! The crate provides:
//!
//! - [`sources`]: Markov, dithered and block-repeat source models with exact
//!   n-block probabilities and seeded sampling.
//! - [`divergence`]: normalized n-th order KL divergence and the
//!   variable-length (VL) divergence, exact or Monte Carlo.
//! - [`recurrence`]: training-block segmentation, a substring index with
//!   first-occurrence and longest-match queries, and recurrence-time
//!   empirical measures.
//! - [`classifiers`]: the known-source maximum-likelihood rule, the
//!   empirical statistics classifier (ESC) and the VL classifier.
//! - [`experiments`]: Monte Carlo error estimation, threshold sweeps and
//!   CSV/JSON reports.

pub mod classifiers;
pub mod divergence;
pub mod error;
pub mod experiments;
pub mod recurrence;
pub mod seed;
pub mod sources;

pub use error::{Error, Result};

/// Library version recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
