//! Orbital-stability runs, tail diagnostics and the gap/distance sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use solitonlab_core::kdv_evolve::{evolve, Conserved, EvolveConfig, Trajectory};
use solitonlab_core::multisoliton::{profile, MultisolitonParams};
use solitonlab_core::spectral_grid::{lp_project, norm, Field, Grid, LpMode, SobolevSpec};
use solitonlab_core::spectral_invariants::variational_gap_report;

use crate::config::{ExperimentConfig, NormSpec};
use crate::error::Result;
use crate::fit::{manifold_distance_with, FitOptions, ManifoldFit};
use crate::perturb::{perturbation, PerturbationSpec};

pub const HORIZON_NOTE: &str =
    "suprema over time are taken over the sampled times in [0, horizon] only";

/// Multisoliton of the config plus its perturbation, if any.
pub fn initial_field(cfg: &ExperimentConfig) -> Result<Field> {
    let grid = cfg.grid()?;
    let q = profile(&cfg.params()?, &grid)?;
    Ok(match &cfg.perturbation {
        Some(p) => q.add(&perturbation(&grid, p)?)?,
        None => q,
    })
}

pub fn evolve_config(cfg: &ExperimentConfig) -> EvolveConfig {
    EvolveConfig {
        dt: cfg.time.dt,
        cfl: cfg.time.cfl,
        boundary_policy: cfg.time.boundary,
        samples: cfg.time.samples,
        ..EvolveConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub norm: NormSpec,
    pub distances: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
    pub initial: f64,
    pub max: f64,
    /// `max / initial`; absent when the initial distance is zero.
    pub ratio: Option<f64>,
}

impl NormSeries {
    fn from_fits(norm: NormSpec, fits: &[ManifoldFit]) -> Self {
        let distances: Vec<f64> = fits.iter().map(|f| f.distance).collect();
        let initial = distances[0];
        let max = distances.iter().fold(0.0f64, |m, d| m.max(*d));
        NormSeries {
            norm,
            positions: fits.iter().map(|f| f.c.clone()).collect(),
            converged: fits.iter().map(|f| f.converged).collect(),
            ratio: (initial > 0.0).then(|| max / initial),
            initial,
            max,
            distances,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEntry {
    pub dyadic: f64,
    pub s: f64,
    /// Largest `‖P_{>N} q(t)‖_{H^s}` over the sampled times.
    pub max: f64,
    pub initial: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub beta: Vec<f64>,
    pub c: Vec<f64>,
    pub perturbation: Option<PerturbationSpec>,
    pub horizon: f64,
    pub horizon_note: String,
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub norms: Vec<NormSeries>,
    /// Max over initial `H^{-1}` distance, when `s = -1` without `κ` was requested.
    pub h_minus_one_ratio: Option<f64>,
    pub tails: Vec<TailEntry>,
    pub max_drift: Conserved,
    pub boundary_max: f64,
    pub boundary_exceeded_at: Option<f64>,
    pub all_converged: bool,
}

/// Fits every stored state of `traj` in each norm. Each fit is seeded with
/// the previous one moved by the soliton velocities `4β²·Δt`.
pub fn distance_series(
    traj: &Trajectory,
    params: &MultisolitonParams,
    norms: &[NormSpec],
) -> Result<Vec<NormSeries>> {
    let specs: Vec<SobolevSpec> = norms.iter().map(|n| n.sobolev()).collect::<Result<_>>()?;
    let beta = params.beta();
    let opts = FitOptions::default();
    let per_norm: Vec<Result<Vec<ManifoldFit>>> = specs
        .par_iter()
        .map(|spec| {
            let mut fits: Vec<ManifoldFit> = Vec::with_capacity(traj.states.len());
            let mut hint = params.c().to_vec();
            let mut prev_t = 0.0;
            for (t, q) in traj.times.iter().zip(&traj.states) {
                for (h, b) in hint.iter_mut().zip(beta) {
                    *h += 4.0 * b * b * (t - prev_t);
                }
                let fit = manifold_distance_with(q, beta, spec, &opts, Some(&hint))?;
                hint = fit.c.clone();
                prev_t = *t;
                fits.push(fit);
            }
            Ok(fits)
        })
        .collect();
    norms
        .iter()
        .zip(per_norm)
        .map(|(n, fits)| Ok(NormSeries::from_fits(*n, &fits?)))
        .collect()
}

/// `max_t ‖P_{>N} q(t)‖_{H^s}` over the stored states.
pub fn tail_monitor(traj: &Trajectory, n: f64, s: f64) -> Result<f64> {
    let spec = SobolevSpec::new(s, None)?;
    let mut out = 0.0f64;
    for q in &traj.states {
        out = out.max(tail_norm(q, n, &spec)?);
    }
    Ok(out)
}

fn tail_norm(q: &Field, n: f64, spec: &SobolevSpec) -> Result<f64> {
    Ok(norm(&lp_project(q, n, LpMode::Above)?, spec))
}

pub struct StabilityOutcome {
    pub report: StabilityReport,
    pub trajectory: Trajectory,
}

pub fn stability_run(cfg: &ExperimentConfig) -> Result<StabilityOutcome> {
    cfg.validate()?;
    let params = cfg.params()?;
    let q0 = initial_field(cfg)?;
    let traj = evolve(&q0, cfg.time.horizon, &[], &evolve_config(cfg))?;
    let norms = distance_series(&traj, &params, &cfg.norms)?;
    let mut tails = vec![];
    let tail_spec = SobolevSpec::new(cfg.tail.s, None)?;
    for &n in &cfg.tail.dyadic {
        let max = tail_monitor(&traj, n, cfg.tail.s)?;
        let initial = tail_norm(&traj.states[0], n, &tail_spec)?;
        tails.push(TailEntry {
            dyadic: n,
            s: cfg.tail.s,
            max,
            initial,
            ratio: (initial > 0.0).then(|| max / initial),
        });
    }
    let h_minus_one_ratio = norms
        .iter()
        .find(|n| n.norm.s == -1.0 && n.norm.kappa.is_none())
        .and_then(|n| n.ratio);
    let report = StabilityReport {
        beta: params.beta().to_vec(),
        c: params.c().to_vec(),
        perturbation: cfg.perturbation,
        horizon: cfg.time.horizon,
        horizon_note: HORIZON_NOTE.into(),
        dt: traj.dt,
        steps: traj.steps,
        times: traj.times.clone(),
        all_converged: norms.iter().all(|n| n.converged.iter().all(|c| *c)),
        norms,
        h_minus_one_ratio,
        tails,
        max_drift: traj.drift.max_drift.clone(),
        boundary_max: traj.boundary_max,
        boundary_exceeded_at: traj.boundary_exceeded_at,
    };
    Ok(StabilityOutcome {
        report,
        trajectory: traj,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub gap: f64,
    pub gap_error: Option<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kappa: f64,
    pub rows: Vec<SweepRow>,
    /// Spearman correlation between the gaps and the `H^{-1}` distances.
    pub rank_correlation: f64,
}

/// Variational gap at `κ` and `H^{-1}` manifold distance of
/// `Q_{β,c} + perturbation` scaled to each `ε`.
pub fn epsilon_sweep(
    params: &MultisolitonParams,
    grid: &Grid,
    base: &PerturbationSpec,
    epsilons: &[f64],
    kappa: f64,
) -> Result<SweepReport> {
    let q0 = profile(params, grid)?;
    let rows: Vec<Result<SweepRow>> = epsilons
        .par_iter()
        .map(|&eps| {
            let spec = PerturbationSpec {
                amplitude: eps,
                ..*base
            };
            let q = q0.add(&perturbation(grid, &spec)?)?;
            let gap = variational_gap_report(&q, kappa)?;
            let fit = manifold_distance_with(
                &q,
                params.beta(),
                &SobolevSpec::h_minus_one(),
                &FitOptions::default(),
                Some(params.c()),
            )?;
            Ok(SweepRow {
                epsilon: eps,
                gap: gap.gap,
                gap_error: gap.alpha_error,
                distance: fit.distance,
            })
        })
        .collect();
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_>>()?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let dists: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    Ok(SweepReport {
        kappa,
        rank_correlation: spearman(&gaps, &dists),
        rows,
    })
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut num = 0.0;
    let (mut da, mut db) = (0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        num += (x - ma) * (y - mb);
        da += (x - ma).powi(2);
        db += (y - mb).powi(2);
    }
    if da == 0.0 || db == 0.0 {
        return 0.0;
    }
    num / (da * db).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![1.5, 0.0, 1.5]);
    }
}
