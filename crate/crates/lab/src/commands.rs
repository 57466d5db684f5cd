//! The experiment subcommands. Each takes a validated config and writes its
//! tables, reports and plot script through an [`OutputSet`].

use std::path::PathBuf;

use num_complex::Complex64;
use serde::Serialize;
use solitonlab_core::kdv_evolve::{evolve, Conserved};
use solitonlab_core::molecular::{molecular_error, MolecularLayout};
use solitonlab_core::multisoliton::{exact_invariants, functionals, Invariants};
use solitonlab_core::spectral_grid::Field;
use solitonlab_core::spectral_invariants::{
    a_jost, alpha_det2, alpha_series_with, blaschke, bound_states_report, domain_report,
    variational_gap_report, AlphaEstimate, BoundStateOptions, BoundStateReport, DomainReport,
    GapReport, WindowOptions,
};

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::experiments::{evolve_config, initial_field, stability_run};
use crate::output::OutputSet;

/// Tolerance of the series route reported by `alpha`.
const SERIES_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Profile,
    Invariants,
    Alpha,
    Scatter,
    Evolve,
    Molecular,
    Stability,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Profile => "profile",
            Task::Invariants => "invariants",
            Task::Alpha => "alpha",
            Task::Scatter => "scatter",
            Task::Evolve => "evolve",
            Task::Molecular => "molecular",
            Task::Stability => "stability",
        }
    }
}

/// Runs `task` and returns every file written, plot script last.
pub fn run(task: Task, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut out = OutputSet::new(&cfg.output.dir, &cfg.output.prefix);
    match task {
        Task::Profile => profile(cfg, &mut out)?,
        Task::Invariants => invariants(cfg, &mut out)?,
        Task::Alpha => alpha(cfg, &mut out)?,
        Task::Scatter => scatter(cfg, &mut out)?,
        Task::Evolve => evolution(cfg, &mut out)?,
        Task::Molecular => molecular(cfg, &mut out)?,
        Task::Stability => stability(cfg, &mut out)?,
    }
    out.finish(&format!("{}_plot", task.name()))
}

fn field_rows(q: &Field) -> Vec<Vec<f64>> {
    q.grid()
        .nodes()
        .into_iter()
        .zip(q.samples())
        .map(|(x, v)| vec![x, *v])
        .collect()
}

#[derive(Serialize)]
struct InvariantsReport {
    beta: Vec<f64>,
    c: Vec<f64>,
    exact: Invariants,
    numerical: Invariants,
    max_rel_diff: f64,
}

fn invariants_report(cfg: &ExperimentConfig, q: &Field) -> Result<InvariantsReport> {
    let params = cfg.params()?;
    let exact = exact_invariants(&params);
    let numerical = functionals(q);
    Ok(InvariantsReport {
        beta: params.beta().to_vec(),
        c: params.c().to_vec(),
        max_rel_diff: numerical.max_rel_diff(&exact),
        exact,
        numerical,
    })
}

/// The initial field on the grid and its conserved functionals.
fn profile(cfg: &ExperimentConfig, out: &mut OutputSet) -> Result<()> {
    let q = initial_field(cfg)?;
    out.csv("profile", &["x", "q"], &field_rows(&q))?;
    out.json("invariants", &invariants_report(cfg, &q)?)?;
    Ok(())
}

#[derive(Serialize)]
struct SpectralReport {
    functionals: InvariantsReport,
    bound_states: BoundStateReport,
    gaps: Vec<GapReport>,
}

/// Functionals, bound states and the variational gap at each `κ`.
fn invariants(cfg: &ExperimentConfig, out: &mut OutputSet) -> Result<()> {
    let q = initial_field(cfg)?;
    let gaps = cfg
        .kappas
        .iter()
        .map(|&k| variational_gap_report(&q, k))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let report = SpectralReport {
        functionals: invariants_report(cfg, &q)?,
        bound_states: bound_states_report(&q, &BoundStateOptions::default())?,
        gaps,
    };
    out.json("spectral", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct AlphaRow {
    kappa: f64,
    domain: DomainReport,
    det2: AlphaEstimate,
    /// Absent outside the series domain.
    series: Option<AlphaEstimate>,
    gap: GapReport,
}

/// `α(κ)` by the determinant and series routes, next to the multisoliton
/// value of the bound states found.
fn alpha(cfg: &ExperimentConfig, out: &mut OutputSet) -> Result<()> {
    if cfg.kappas.is_empty() {
        return Err(LabError::Config(
            "alpha needs at least one entry in kappas".into(),
        ));
    }
    let q = initial_field(cfg)?;
    let window = WindowOptions::default();
    let mut rows = vec![];
    let mut report = vec![];
    for &kappa in &cfg.kappas {
        let domain = domain_report(&q, kappa)?;
        let det2 = alpha_det2(&q, kappa, &window)?;
        let series = if domain.series_ok {
            Some(alpha_series_with(&q, kappa, SERIES_TOL, &window)?)
        } else {
            None
        };
        let gap = variational_gap_report(&q, kappa)?;
        rows.push(vec![
            kappa,
            det2.value,
            series.map_or(f64::NAN, |s| s.value),
            gap.multisoliton_alpha,
            gap.gap,
        ]);
        report.push(AlphaRow {
            kappa,
            domain,
            det2,
            series,
            gap,
        });
    }
    out.csv(
        "alpha",
        &[
            "kappa",
            "alpha_det2",
            "alpha_series",
            "alpha_multisoliton",
            "gap",
        ],
        &rows,
    )?;
    out.json("alpha", &report)?;
    Ok(())
}

/// `a(k)` from the Jost solutions against the Blaschke product of `β`.
fn scatter(cfg: &ExperimentConfig, out: &mut OutputSet) -> Result<()> {
    if cfg.scatter.is_empty() {
        return Err(LabError::Config("scatter needs at least one point".into()));
    }
    let q = initial_field(cfg)?;
    let beta = cfg.params()?.beta().to_vec();
    let mut rows = vec![];
    for k in &cfg.scatter {
        let k = Complex64::new(k[0], k[1]);
        let a = a_jost(&q, k)?;
        let b = blaschke(&beta, k);
        rows.push(vec![
            k.re,
            k.im,
            a.re,
            a.im,
            a.norm(),
            b.re,
            b.im,
            (a - b).norm(),
        ]);
    }
    out.csv(
        "scatter",
        &[
            "re_k",
            "im_k",
            "re_a",
            "im_a",
            "abs_a",
            "re_blaschke",
            "im_blaschke",
            "error_blaschke",
        ],
        &rows,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct EvolveReport {
    horizon: f64,
    dt: f64,
    steps: usize,
    kappas: Vec<f64>,
    baseline: Conserved,
    max_drift: Conserved,
    boundary_max: f64,
    boundary_exceeded_at: Option<f64>,
}

/// KdV evolution to the horizon with conservation monitors.
fn evolution(cfg: &ExperimentConfig, out: &mut OutputSet) -> Result<()> {
    let q0 = initial_field(cfg)?;
    let traj = evolve(&q0, cfg.time.horizon, &cfg.kappas, &evolve_config(cfg))?;
    let mut header = vec![
        "t".to_string(),
        "integral".into(),
        "momentum".into(),
        "energy".into(),
    ];
    header.extend(cfg.kappas.iter().map(|k| format!("alpha_k{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = traj
        .drift
        .history
        .iter()
        .map(|(t, c)| {
            let mut r = vec![*t, c.integral, c.momentum, c.energy];
            r.extend(&c.alpha);
            r
        })
        .collect();
    out.csv("conserved", &header, &rows)?;
    out.csv("final", &["x", "q"], &field_rows(traj.final_state()))?;
    out.json(
        "evolve",
        &EvolveReport {
            horizon: cfg.time.horizon,
            dt: traj.dt,
            steps: traj.steps,
            kappas: cfg.kappas.clone(),
            baseline: traj.drift.baseline.clone(),
            max_drift: traj.drift.max_drift.clone(),
            boundary_max: traj.boundary_max,
            boundary_exceeded_at: traj.boundary_exceeded_at,
        },
    )?;
    Ok(())
}

/// Decomposition error of evenly spaced groups at each separation.
fn molecular(cfg: &ExperimentConfig, out: &mut OutputSet) -> Result<()> {
    let Some(spec) = &cfg.molecular else {
        return Err(LabError::Config(
            "molecular needs a molecular section".into(),
        ));
    };
    let grid = cfg.grid()?;
    let mut rows = vec![];
    for &sep in &spec.separations {
        let layout = MolecularLayout::evenly_spaced(&spec.groups, sep)
            .map_err(|e| LabError::Config(e.to_string()))?;
        rows.push(vec![sep, molecular_error(&layout, &grid)?]);
    }
    out.csv("molecular", &["separation", "error_l2"], &rows)?;
    Ok(())
}

/// Manifold distances along the perturbed evolution, with tail monitors.
fn stability(cfg: &ExperimentConfig, out: &mut OutputSet) -> Result<()> {
    let run = stability_run(cfg)?;
    let r = &run.report;
    let labels: Vec<String> = r.norms.iter().map(|n| n.norm.label()).collect();
    let mut header = vec!["t"];
    header.extend(labels.iter().map(String::as_str));
    let rows: Vec<Vec<f64>> = r
        .times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![*t];
            row.extend(r.norms.iter().map(|n| n.distances[i]));
            row
        })
        .collect();
    out.csv("distance", &header, &rows)?;
    let tails: Vec<Vec<f64>> = r
        .tails
        .iter()
        .map(|t| vec![t.dyadic, t.max, t.initial])
        .collect();
    out.csv("tail", &["dyadic", "tail_max", "tail_initial"], &tails)?;
    out.json("stability", r)?;
    Ok(())
}
