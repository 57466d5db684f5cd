//! Experiment driver for the multisoliton laboratory: manifold fits,
//! perturbations, stability runs and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod output;
pub mod perturb;

pub use error::{LabError, Result};
