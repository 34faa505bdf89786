//! Exhaustive Anchors for text classifiers.
//!
//! An anchor is a set of word occurrences of the explained document `ξ`. Its
//! precision is the probability that a perturbation of `ξ` keeping those
//! occurrences (every other position is replaced by `UNK` with probability
//! 1/2) is still classified as 1. The selection engine scans every candidate
//! anchor, keeps those whose evaluation reaches `1 - ε`, then the shortest of
//! those, then the best-scoring, for a pluggable evaluation function:
//!
//! * [`precision::exact_precision`]: exact enumeration of the multiplicity
//!   law for linear TF-IDF models,
//! * [`precision::empirical_precision`]: Monte Carlo mean over perturbed
//!   samples for any [`models::Classifier`],
//! * [`precision::approx_precision`]: the Gaussian surrogate `Φ̄(L(A))`.
//!
//! [`analysis`] holds the verification harness for the Gaussian bound and for
//! the prefix structure of anchors selected on linear models.

pub mod analysis;
pub mod engine;
mod error;
pub mod models;
pub mod perturbation;
pub mod precision;
pub mod rng;
pub mod text;
pub mod vectorizer;

pub use error::{Error, Result};
