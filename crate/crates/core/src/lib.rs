//! Simulation and statistical verification of recurrence properties for
//! two-regime switching diffusions `dX = b(X, Z) dt + dW`.
//!
//! Modules follow the pipeline: [`model`] holds parameters and the
//! algebraic conditions, [`engine`] simulates paths, [`chain`] works on the
//! embedded chain sampled every second jump, [`estimators`] turns ensembles
//! into estimates, and [`experiments`] binds everything into named checks.

pub mod chain;
pub mod config;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod model;
pub mod report;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
