use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use solitonlab::acceptance::{run_all, CRITERIA, DEFAULT_SEED};
use solitonlab::commands::{run, Task};
use solitonlab::config::ExperimentConfig;
use solitonlab::output::OutputSet;
use solitonlab::{LabError, Result};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "SOLITONLAB_THREADS";

#[derive(Parser)]
#[command(
    name = "solitonlab",
    version,
    about = "Numerical laboratory for KdV multisolitons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the perturbation seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory of the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the multisoliton (plus perturbation) and its conserved functionals.
    Profile(Common),
    /// Bound states and variational gaps of the initial field.
    Invariants(Common),
    /// The renormalized perturbation determinant at each κ.
    Alpha(Common),
    /// Transmission coefficient at the configured spectral parameters.
    Scatter(Common),
    /// KdV evolution with conservation monitors.
    Evolve(Common),
    /// Decomposition error of well-separated groups.
    Molecular(Common),
    /// Distance to the multisoliton manifold along a perturbed evolution.
    Stability(Common),
    /// Run the acceptance criteria; exits nonzero if any fails.
    Selftest {
        /// Seed of the random instances.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for the verdict report.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        match cfg.perturbation.as_mut() {
            Some(p) => p.seed = seed,
            None => log::warn!("--seed given but the config has no perturbation"),
        }
    }
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

fn experiment(task: Task, common: &Common) -> Result<()> {
    let cfg = load(common)?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    for path in run(task, &cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}

/// Returns whether every criterion passed.
fn selftest(seed: u64, out: &PathBuf, only: &[u32]) -> Result<bool> {
    let ids: Vec<u32> = if only.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        only.to_vec()
    };
    let verdicts = run_all(&ids, seed, |v, took| {
        eprintln!(
            "criterion {:>2} {} ({:.1} s) {}: {}",
            v.id,
            if v.passed { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            v.name,
            v.detail
        );
    });
    std::fs::create_dir_all(out)?;
    let mut set = OutputSet::new(out, "selftest");
    set.json(
        "verdicts",
        &serde_json::json!({ "seed": seed, "verdicts": verdicts }),
    )?;
    for path in set.finish("plot")? {
        println!("{}", path.display());
    }
    let passed = verdicts.iter().all(|v| v.passed);
    eprintln!(
        "{} of {} criteria passed",
        verdicts.iter().filter(|v| v.passed).count(),
        verdicts.len()
    );
    Ok(passed)
}

fn configure_threads() -> Result<()> {
    let Ok(text) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = text.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        LabError::Config(format!("{THREADS_VAR}={text:?} is not a positive count"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| LabError::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::Profile(c) => experiment(Task::Profile, c).map(|()| true),
        Command::Invariants(c) => experiment(Task::Invariants, c).map(|()| true),
        Command::Alpha(c) => experiment(Task::Alpha, c).map(|()| true),
        Command::Scatter(c) => experiment(Task::Scatter, c).map(|()| true),
        Command::Evolve(c) => experiment(Task::Evolve, c).map(|()| true),
        Command::Molecular(c) => experiment(Task::Molecular, c).map(|()| true),
        Command::Stability(c) => experiment(Task::Stability, c).map(|()| true),
        Command::Selftest { seed, out, only } => selftest(seed.unwrap_or(DEFAULT_SEED), out, only),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
