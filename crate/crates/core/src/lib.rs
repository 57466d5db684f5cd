//! Numerical laboratory for KdV multisolitons: exact profiles, perturbation
//! determinants and their trace series, molecular decompositions, and a
//! pseudospectral integrator.

pub mod error;
pub mod io;
pub mod kdv_evolve;
pub mod molecular;
pub mod multisoliton;
pub mod spectral_grid;
pub mod spectral_invariants;

pub use error::{Error, Result};
