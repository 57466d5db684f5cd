//! Gap between `α(κ;q)` and the multisoliton value `Σ G(β_m/κ)` carried by
//! the bound states of `q`. It is nonnegative and vanishes exactly on
//! multisolitons.

use serde::{Deserialize, Serialize};

use super::alpha::{alpha_det2, closed_form_alpha, domain_report, WindowOptions};
use super::bound_states::{bound_states_report, BoundStateOptions};
use crate::error::{Error, Result};
use crate::spectral_grid::Field;

/// Bound states whose `β` falls below this are dropped from the sum.
pub const NEAR_THRESHOLD_BETA: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub kappa: f64,
    pub alpha: f64,
    pub alpha_error: Option<f64>,
    pub betas: Vec<f64>,
    /// `β`'s below [`NEAR_THRESHOLD_BETA`], excluded from `multisoliton_alpha`.
    pub excluded: Vec<f64>,
    pub multisoliton_alpha: f64,
    pub gap: f64,
    pub strict_domain: bool,
}

pub fn variational_gap(q: &Field, kappa: f64) -> Result<f64> {
    Ok(variational_gap_report(q, kappa)?.gap)
}

/// Requires `κ` above every `β`. The determinant route needs nothing more;
/// `strict_domain` records whether `κ ≥ 1 + ‖q‖²_{H^{-1}}` also holds.
pub fn variational_gap_report(q: &Field, kappa: f64) -> Result<GapReport> {
    let dom = domain_report(q, kappa)?;
    let bs = bound_states_report(q, &BoundStateOptions::default())?;
    if let Some(i) = bs.jost_confirmed.iter().position(|c| *c == Some(false)) {
        return Err(Error::NumericalFailure(format!(
            "bound state β = {} has no matching zero of a(iβ)",
            bs.betas[i]
        )));
    }
    let (excluded, betas): (Vec<f64>, Vec<f64>) =
        bs.betas.iter().partition(|b| **b < NEAR_THRESHOLD_BETA);
    if !excluded.is_empty() {
        log::warn!("near-threshold bound states {excluded:?} excluded from the gap");
    }
    if let Some(b) = betas.last() {
        if *b >= kappa {
            return Err(Error::OutOfDomain(format!(
                "κ = {kappa} does not exceed the largest β = {b}"
            )));
        }
    }
    let a = alpha_det2(q, kappa, &WindowOptions::default())?;
    let ms = closed_form_alpha(&betas, kappa)?;
    Ok(GapReport {
        kappa,
        alpha: a.value,
        alpha_error: a.error_estimate,
        betas,
        excluded,
        multisoliton_alpha: ms,
        gap: a.value - ms,
        strict_domain: dom.strict_ok,
    })
}
