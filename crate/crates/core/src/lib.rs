//! Robust actor-critic contextual bandit.
//!
//! The critic fits a linear expected-reward model under a capped squared
//! loss, with the cap chosen from the residual boxplot; tuples whose
//! residuals exceed it get zero weight. The actor maximises a Boltzmann
//! policy's estimated reward over the remaining tuples. Simulators for the
//! HeartSteps mobile-health model and a 4-state chain walk, outlier
//! injection, long-run average reward evaluation and experiment sweeps
//! round out the crate.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actor;
pub mod critic;
pub mod envs;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod numerics;
pub mod pipeline;
pub mod trajectory;

pub use error::{Error, Result};
