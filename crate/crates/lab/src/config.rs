//! Experiment configuration, read from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use solitonlab_core::kdv_evolve::BoundaryPolicy;
use solitonlab_core::multisoliton::MultisolitonParams;
use solitonlab_core::spectral_grid::{Grid, SobolevSpec};

use crate::error::{LabError, Result};
use crate::perturb::PerturbationSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub beta: Vec<f64>,
    /// Positions; zeros when absent.
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    pub grid: GridSpec,
    #[serde(default)]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default)]
    pub time: TimeSpec,
    /// Norms in which distances are reported.
    #[serde(default = "default_norms")]
    pub norms: Vec<NormSpec>,
    /// `κ` values for `alpha` and for the `α` monitors of `evolve`.
    #[serde(default)]
    pub kappas: Vec<f64>,
    /// Spectral parameters `[Re k, Im k]` for `scatter`.
    #[serde(default)]
    pub scatter: Vec<[f64; 2]>,
    #[serde(default)]
    pub molecular: Option<MolecularSpec>,
    #[serde(default)]
    pub tail: TailSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub length: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub horizon: f64,
    /// Stored times, both endpoints included.
    pub samples: usize,
    pub dt: f64,
    pub cfl: f64,
    pub boundary: BoundaryPolicy,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec {
            horizon: 5.0,
            samples: 26,
            dt: 1e-4,
            cfl: 1.0,
            boundary: BoundaryPolicy::Warn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub s: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
}

fn default_norms() -> Vec<NormSpec> {
    [-1.0, 0.0, 1.0]
        .into_iter()
        .map(|s| NormSpec { s, kappa: None })
        .collect()
}

impl NormSpec {
    pub fn sobolev(&self) -> Result<SobolevSpec> {
        SobolevSpec::new(self.s, self.kappa).map_err(|e| LabError::Config(e.to_string()))
    }

    /// Column label such as `distance_s-1` or `distance_s-1_k2`.
    pub fn label(&self) -> String {
        match self.kappa {
            Some(k) => format!("distance_s{}_k{}", self.s, k),
            None => format!("distance_s{}", self.s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MolecularSpec {
    /// Amplitudes of each group, left to right.
    pub groups: Vec<Vec<f64>>,
    pub separations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    /// Dyadic frequencies `N` of the tail projections.
    pub dyadic: Vec<f64>,
    pub s: f64,
}

impl Default for TailSpec {
    fn default() -> Self {
        TailSpec {
            dyadic: vec![8.0, 16.0, 32.0],
            s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub prefix: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            prefix: "run".into(),
        }
    }
}

impl ExperimentConfig {
    /// The stability experiment: `β = (1, 2)` with the faster soliton behind,
    /// so they collide near `t = 2.5`, plus a seeded perturbation of
    /// `H^{-1}` size `1e-3`.
    pub fn stability_default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            beta: vec![1.0, 2.0],
            c: Some(vec![0.0, -30.0]),
            grid: GridSpec {
                length: 200.0,
                points: 4096,
            },
            perturbation: Some(PerturbationSpec {
                seed: 1,
                amplitude: 1e-3,
                band: 2.0,
                width: 4.0,
                center: -10.0,
            }),
            time: TimeSpec::default(),
            norms: default_norms(),
            kappas: vec![],
            scatter: vec![],
            molecular: None,
            tail: TailSpec::default(),
            output: OutputSpec::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn params(&self) -> Result<MultisolitonParams> {
        let c = self.c.clone().unwrap_or_else(|| vec![0.0; self.beta.len()]);
        MultisolitonParams::new(self.beta.clone(), c).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.length, self.grid.points).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let params = self.params()?;
        let grid = self.grid()?;
        if let Some(p) = &self.perturbation {
            p.validate(&grid)
                .map_err(|e| LabError::Config(e.to_string()))?;
        }
        let t = &self.time;
        if !t.horizon.is_finite() {
            return bad(format!("time horizon {} is not finite", t.horizon));
        }
        if t.samples < 2 {
            return bad("time.samples must be at least 2".into());
        }
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return bad(format!("time.dt {} must be positive", t.dt));
        }
        if !(t.cfl > 0.0) {
            return bad(format!("time.cfl {} must be positive", t.cfl));
        }
        for n in &self.norms {
            n.sobolev()?;
        }
        let top = params.beta().iter().fold(0.0f64, |m, b| m.max(*b));
        for &k in &self.kappas {
            if !(k.is_finite() && k > top) {
                return bad(format!(
                    "κ = {k} must exceed every amplitude (largest {top})"
                ));
            }
        }
        for k in &self.scatter {
            if !(k[0].is_finite() && k[1].is_finite() && k[1] >= 0.0)
                || (k[0] == 0.0 && k[1] == 0.0)
            {
                return bad(format!("scatter point {k:?} must be nonzero with Im k ≥ 0"));
            }
        }
        if let Some(m) = &self.molecular {
            if m.groups.is_empty() || m.groups.iter().any(|g| g.is_empty()) {
                return bad("molecular groups must be nonempty".into());
            }
            if m.separations.is_empty()
                || m.separations.iter().any(|s| !(s.is_finite() && *s > 0.0))
            {
                return bad("molecular separations must be positive".into());
            }
        }
        let (lo, hi) = grid.dyadic_range();
        for &n in &self.tail.dyadic {
            if !(n >= lo && n <= hi && n.log2().round().exp2() == n) {
                return bad(format!(
                    "tail frequency {n} is not a dyadic number in [{lo}, {hi}]"
                ));
            }
        }
        if !(-1.0..=1.0).contains(&self.tail.s) {
            return bad(format!("tail exponent {} outside [-1, 1]", self.tail.s));
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return bad(format!(
                "output prefix {:?} is not a plain file stem",
                self.output.prefix
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::stability_default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "beta": [1.0], "grid": {"length": 40, "points": 256}}"#,
        )
        .unwrap();
        assert_eq!(cfg.norms.len(), 3);
        assert_eq!(cfg.params().unwrap().c(), &[0.0]);
    }

    #[test]
    fn schema_errors_are_config_errors() {
        for text in [
            r#"{"schema_version": 2, "beta": [1.0], "grid": {"length": 40, "points": 256}}"#,
            r#"{"schema_version": 1, "beta": [1.0], "grid": {"length": 40, "points": 300}}"#,
            r#"{"schema_version": 1, "beta": [1.0, 1.0], "grid": {"length": 40, "points": 256}}"#,
            r#"{"schema_version": 1, "beta": [1.0], "grid": {"length": 40, "points": 256}, "extra": 1}"#,
            r#"{"schema_version": 1, "beta": [2.0], "grid": {"length": 40, "points": 256}, "kappas": [1.5]}"#,
            r#"{"schema_version": 1, "beta": [1.0]"#,
        ] {
            let e = ExperimentConfig::from_json(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
    }
}
