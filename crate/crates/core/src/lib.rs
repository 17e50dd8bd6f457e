//! Training-data reconstruction attacks by informed adversaries.
//!
//! The crate covers the whole experimental loop around an adversary that
//! knows every training record but one:
//!
//! - [`nn`]: deterministic MLP training (GD/SGD with momentum, DP-GD),
//! - [`data`]: dataset loading, generation and role splits,
//! - [`glm`]: exact closed-form reconstruction against GLMs,
//! - [`shadow`]: the learned reconstructor attack built on shadow models,
//! - [`metrics`]: MSE, nearest-neighbour oracle and KL probe,
//! - [`mia`]: informed membership inference,
//! - [`accounting`]: zCDP/RDP/(ε, δ) accounting for DP-GD,
//! - [`rero`]: reconstruction-robustness bounds and their Monte-Carlo checks,
//! - [`experiment`]: end-to-end pipelines shared by the CLI and examples.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod glm;
pub mod metrics;
pub mod mia;
pub mod nn;
pub mod persist;
pub mod rero;
pub mod rng;
pub mod shadow;
pub mod stats;

pub use error::{Error, Result};
