//! Experiment harness: instance families, experiment specs, runs and
//! reports for the agnostic boosters in `agboost-core`.

pub mod error;
pub mod families;
pub mod report;
pub mod runner;
pub mod spec;

pub use error::{HarnessError, Result};
