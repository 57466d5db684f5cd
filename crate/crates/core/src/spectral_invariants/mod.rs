//! Scattering-side invariants of a potential: the perturbation determinant
//! and its trace series, the Jost-solution transmission coefficient, bound
//! states, and the variational gap between `α` and its multisoliton value.

pub mod alpha;
pub mod bound_states;
pub mod gap;
pub mod jost;
pub mod kmatrix;
pub mod lattice;

pub use alpha::{
    a_ren_det2, alpha_det2, alpha_series, alpha_series_with, blaschke, closed_form_alpha,
    domain_report, g_closed_form, g_function, g_series, log_det2, AlphaEstimate, Det2Estimate,
    DomainReport, WindowOptions, SERIES_RATIO_MAX,
};
pub use bound_states::{bound_states, bound_states_report, BoundStateOptions, BoundStateReport};
pub use gap::{variational_gap, variational_gap_report, GapReport, NEAR_THRESHOLD_BETA};
pub use jost::{a_jost, a_jost_with, JostOptions};
pub use kmatrix::{
    build_k_matrix, operator_hs_norm, operator_trace_cube, operator_trace_sq, KMatrix,
};
