//! Sensitivity-based robustness of estimation error for linear systems with
//! polynomial parameter dependence.
//!
//! The estimation error is the output of the augmented system built from a
//! truth model and an estimate ([`systems::build_augmented`]). Its parameter
//! sensitivity is measured by simulation ([`sensitivity`]) and bounded in
//! closed form ([`bounds`]); [`metric`] turns either into a robustness score.

pub mod bounds;
pub mod checks;
pub mod config;
pub mod error;
pub mod linalg;
pub mod metric;
pub mod param;
pub mod report;
pub mod run;
pub mod scenarios;
pub mod sensitivity;
pub mod systems;

pub use error::{Error, Result};
