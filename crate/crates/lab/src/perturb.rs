//! Seeded band-limited perturbations scaled to an exact `H^{-1}` norm.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use solitonlab_core::spectral_grid::{norm, Field, Grid, SobolevSpec};
use solitonlab_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub seed: u64,
    /// Target `‖·‖_{H^{-1}}` (weight `(1+ξ²)^{-1}`).
    pub amplitude: f64,
    /// Largest frequency `|ξ|` carried by the noise.
    pub band: f64,
    /// Standard deviation of the Gaussian envelope.
    pub width: f64,
    pub center: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            seed: 0,
            amplitude: 1e-3,
            band: 2.0,
            width: 4.0,
            center: 0.0,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidInput(format!(
                "perturbation {what} {v} is invalid"
            )))
        };
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return bad("amplitude", self.amplitude);
        }
        if !(self.band.is_finite() && self.band >= grid.dxi()) {
            return bad("band", self.band);
        }
        if self.band >= grid.nyquist_frequency() {
            return Err(Error::OutOfBand(format!(
                "perturbation band {} reaches the Nyquist frequency {}",
                self.band,
                grid.nyquist_frequency()
            )));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return bad("width", self.width);
        }
        if !self.center.is_finite() {
            return bad("center", self.center);
        }
        Ok(())
    }
}

/// White noise on `0 < |ξ| ≤ band`, localized by a Gaussian envelope and then
/// rescaled so its `H^{-1}` norm is exactly `amplitude`.
pub fn perturbation(grid: &Grid, spec: &PerturbationSpec) -> Result<Field> {
    spec.validate(grid)?;
    if spec.amplitude == 0.0 {
        return Ok(Field::zeros(*grid));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let nyq = grid.nyquist_index();
    let spectrum: Vec<Complex64> = (0..grid.points())
        .map(|m| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let xi = grid.frequency(m).abs();
            if m == 0 || m == nyq || xi > spec.band {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(re, im)
            }
        })
        .collect();
    let noise = Field::from_spectrum(*grid, &spectrum)?;
    let w = spec.width;
    let env = Field::from_fn(*grid, |x| (-0.5 * ((x - spec.center) / w).powi(2)).exp())?;
    let shaped = Field::new(
        *grid,
        noise
            .samples()
            .iter()
            .zip(env.samples())
            .map(|(a, b)| a * b)
            .collect(),
    )?;
    let n = norm(&shaped, &SobolevSpec::h_minus_one());
    if n == 0.0 {
        return Err(Error::NumericalFailure(
            "perturbation vanished on the grid".into(),
        ));
    }
    shaped.scale(spec.amplitude / n)
}
