//! rankforge: a learning-to-rank toolkit that trains neural scorers by
//! directly optimizing the information-retrieval metrics you actually care
//! about (Precision@k, AP, nDCG, nERR@k).
//!
//! The core idea: document ranks are computed exactly from pairwise score
//! comparisons using a step-function forward pass, while the backward pass
//! substitutes a scaled sigmoid derivative for the step's (useless) true
//! derivative.  Because the forward rank is exact, the training objective
//! *is* the evaluation metric (negated); because the backward pass is a
//! smooth surrogate, gradients still flow.  Three gradient strategies of
//! increasing label-awareness are provided, plus smooth-approximation and
//! listwise baselines for comparison.
//!
//! Module map:
//!
//! - [`numerics`]: dense matrices, a small feed-forward scorer with manual
//!   backprop, batch normalization, Adam, and text checkpoints.
//! - [`data`]: LETOR-format parsing, per-query feature normalization,
//!   deterministic fold splits, and synthetic dataset generators.
//! - [`metrics`]: exact IR metrics over score-sorted label vectors.
//! - [`ranking`]: exact and smooth rank derivations from raw scores, the
//!   sigmoid backward substitutions, and the rank-accuracy experiment
//!   helpers.
//! - [`losses`]: differentiable metric losses (exact forward, surrogate
//!   backward), their fully smooth counterparts, and listwise baselines.
//! - [`harness`]: training loop, k-fold cross-validation, evaluation and
//!   report/CSV emission, and the rank-accuracy experiment driver.

pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod metrics;
pub mod numerics;
pub mod ranking;

pub use error::{Error, Result};
