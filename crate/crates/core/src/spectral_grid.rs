//! Periodic grid on `[-L/2, L/2)` standing in for the real line, with a unitary
//! discrete Fourier transform, Sobolev-type norms and sharp dyadic
//! (Littlewood–Paley) projections.
//!
//! Spectra are stored in FFT order: index `m < M/2` is frequency `2πm/L`,
//! index `m ≥ M/2` is frequency `2π(m-M)/L`. Index `M/2` is the Nyquist mode.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();

/// Forward/inverse FFT plans of one length. Cheap to clone.
#[derive(Clone)]
pub struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = PLANNER
            .get_or_init(|| Mutex::new(FftPlanner::new()))
            .lock()
            .unwrap_or_else(|p| p.into_inner());
        FftPair {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Unnormalized `X_m = Σ_j x_j e^{-2πi jm/M}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Unnormalized inverse (no `1/M`).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FftPair({})", self.forward.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    points: usize,
}

impl Grid {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid length must be positive, got {length}"
            )));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "point count must be a power of two >= 8, got {points}"
            )));
        }
        Ok(Grid { length, points })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Node spacing `h = L/M`.
    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.node(j)).collect()
    }

    /// Frequency spacing `2π/L`.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn nyquist_index(&self) -> usize {
        self.points / 2
    }

    /// Largest resolved |ξ|, i.e. the magnitude of the Nyquist frequency.
    pub fn nyquist_frequency(&self) -> f64 {
        PI * self.points as f64 / self.length
    }

    /// Signed wavenumber of FFT slot `m`; the Nyquist slot maps to `-M/2`.
    pub fn signed_index(&self, m: usize) -> i64 {
        let half = self.points / 2;
        if m < half {
            m as i64
        } else {
            m as i64 - self.points as i64
        }
    }

    /// FFT slot of signed wavenumber `k`, if it lies in `[-M/2, M/2)`.
    pub fn slot(&self, k: i64) -> Option<usize> {
        let half = (self.points / 2) as i64;
        if k >= -half && k < half {
            Some(k.rem_euclid(self.points as i64) as usize)
        } else {
            None
        }
    }

    pub fn frequency(&self, m: usize) -> f64 {
        self.dxi() * self.signed_index(m) as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.points).map(|m| self.frequency(m)).collect()
    }

    /// The dyadic numbers accepted by [`lp_project`]: from the largest power
    /// of two below `2π/L` up to the smallest power of two at or above the
    /// Nyquist frequency.
    pub fn dyadic_range(&self) -> (f64, f64) {
        let dxi = self.dxi();
        let mut lo = dxi.log2().floor().exp2();
        if lo >= dxi {
            lo *= 0.5;
        }
        let hi = self.nyquist_frequency().log2().ceil().exp2();
        (lo, hi)
    }

    pub fn dyadic_numbers(&self) -> Vec<f64> {
        let (lo, hi) = self.dyadic_range();
        let mut out = vec![];
        let mut n = lo;
        while n <= hi {
            out.push(n);
            n *= 2.0;
        }
        out
    }
}

/// Unitary transform of raw samples: `q̂_m = (2π)^{-1/2} h Σ_j q_j e^{-iξ_m x_j}`.
pub fn forward_transform(grid: &Grid, samples: &[f64]) -> Result<Vec<Complex64>> {
    if samples.len() != grid.points() {
        return Err(Error::InvalidInput(format!(
            "expected {} samples, got {}",
            grid.points(),
            samples.len()
        )));
    }
    if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite sample at index {j}"
        )));
    }
    Ok(forward_unchecked(
        grid,
        samples,
        &FftPair::new(grid.points()),
    ))
}

fn forward_unchecked(grid: &Grid, samples: &[f64], fft: &FftPair) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut buf);
    let scale = grid.spacing() / (2.0 * PI).sqrt();
    for (m, z) in buf.iter_mut().enumerate() {
        // e^{-iξ_m x_0} = (-1)^m because x_0 = -L/2.
        let sign = if m % 2 == 0 { scale } else { -scale };
        *z *= sign;
    }
    buf
}

/// Exact inverse of [`forward_transform`]; returns the real part.
pub fn inverse_transform(grid: &Grid, spectrum: &[Complex64]) -> Vec<f64> {
    inverse_with(grid, spectrum, &FftPair::new(grid.points()))
}

pub(crate) fn inverse_with(grid: &Grid, spectrum: &[Complex64], fft: &FftPair) -> Vec<f64> {
    let m_pts = grid.points();
    let scale = (2.0 * PI).sqrt() / grid.spacing() / m_pts as f64;
    let mut buf: Vec<Complex64> = spectrum
        .iter()
        .enumerate()
        .map(|(m, &z)| if m % 2 == 0 { z * scale } else { -z * scale })
        .collect();
    fft.inverse(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Real samples on a grid with a lazily computed unitary spectrum.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Grid,
    samples: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl Field {
    pub fn new(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.points() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                grid.points(),
                samples.len()
            )));
        }
        if let Some(j) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at index {j}"
            )));
        }
        Ok(Field {
            grid,
            samples,
            spectrum: OnceLock::new(),
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            samples: vec![0.0; grid.points()],
            spectrum: OnceLock::new(),
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Field::new(grid, grid.nodes().into_iter().map(f).collect())
    }

    /// Field whose unitary spectrum is `spectrum` (imaginary residue of the
    /// inverse is dropped).
    pub fn from_spectrum(grid: Grid, spectrum: &[Complex64]) -> Result<Self> {
        if spectrum.len() != grid.points() {
            return Err(Error::InvalidInput("spectrum length mismatch".into()));
        }
        Field::new(grid, inverse_transform(&grid, spectrum))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Cached unitary spectrum in FFT order.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            forward_unchecked(&self.grid, &self.samples, &FftPair::new(self.grid.points()))
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid, self.samples.iter().map(|&v| f(v)).collect())
    }

    fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("fields live on different grids".into()));
        }
        Field::new(
            self.grid,
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Result<Field> {
        self.map(|v| s * v)
    }

    /// `∫ q dx` by the trapezoid (spectrally accurate) rule.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.samples.iter().sum::<f64>()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.spacing() * self.samples.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest |q| over the outermost `fraction` of the box on each side.
    pub fn boundary_amplitude(&self, fraction: f64) -> f64 {
        let m = self.grid.points();
        let band = ((fraction * m as f64).ceil() as usize).clamp(1, m / 2);
        self.samples[..band]
            .iter()
            .chain(&self.samples[m - band..])
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Copy with the Nyquist coefficient removed.
    pub fn without_nyquist(&self) -> Field {
        let mut s = self.spectrum().to_vec();
        s[self.grid.nyquist_index()] = Complex64::new(0.0, 0.0);
        Field::from_spectrum(self.grid, &s).expect("finite spectrum")
    }

    /// Spectral derivative of the given order; the Nyquist mode is zeroed.
    pub fn derivative(&self, order: u32) -> Field {
        let mut s = self.spectrum().to_vec();
        let i = Complex64::new(0.0, 1.0);
        for (m, z) in s.iter_mut().enumerate() {
            *z *= (i * self.grid.frequency(m)).powu(order);
        }
        s[self.grid.nyquist_index()] = Complex64::new(0.0, 0.0);
        Field::from_spectrum(self.grid, &s).expect("finite spectrum")
    }

    /// `x ↦ q(x - shift)` by spectral phase shift.
    pub fn translate(&self, shift: f64) -> Field {
        let mut s = self.spectrum().to_vec();
        let nyq = self.grid.nyquist_index();
        for (m, z) in s.iter_mut().enumerate() {
            let xi = self.grid.frequency(m);
            if m == nyq {
                *z *= (xi * shift).cos();
            } else {
                *z *= Complex64::from_polar(1.0, -xi * shift);
            }
        }
        Field::from_spectrum(self.grid, &s).expect("finite spectrum")
    }

    /// Trigonometric interpolant through the samples, evaluable off-grid.
    pub fn interpolant(&self, rel_cutoff: f64) -> TrigInterpolant {
        TrigInterpolant::new(self, rel_cutoff)
    }
}

/// Spectrum of a field as an owned vector.
pub fn transform(field: &Field) -> Vec<Complex64> {
    field.spectrum().to_vec()
}

/// Evaluates `(2π)^{-1/2} Δξ Σ_m q̂_m e^{iξ_m x}` at arbitrary `x`, keeping
/// only the modes up to the last one above `rel_cutoff · max|q̂|`.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    dxi: f64,
    dc: f64,
    coeffs: Vec<Complex64>,
    nyquist: Option<(f64, f64)>,
}

impl TrigInterpolant {
    fn new(field: &Field, rel_cutoff: f64) -> Self {
        let g = field.grid();
        let spec = field.spectrum();
        let c = g.dxi() / (2.0 * PI).sqrt();
        let peak = spec.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let half = g.points() / 2;
        let mut top = 0;
        for m in 1..half {
            let a = spec[m].norm().max(spec[g.points() - m].norm());
            if a > rel_cutoff * peak {
                top = m;
            }
        }
        // Positive and negative modes combine into 2 Re(q̂_m e^{iξx}) for real q.
        let coeffs = (1..=top)
            .map(|m| (spec[m] + spec[g.points() - m].conj()) * c)
            .collect();
        let nyq = spec[half];
        let nyquist = if nyq.norm() > rel_cutoff * peak && peak > 0.0 {
            Some((nyq.re * c, g.nyquist_frequency()))
        } else {
            None
        };
        TrigInterpolant {
            dxi: g.dxi(),
            dc: spec[0].re * c,
            coeffs,
            nyquist,
        }
    }

    pub fn mode_count(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let step = Complex64::from_polar(1.0, self.dxi * x);
        let mut z = step;
        let mut acc = 0.0;
        for (m, a) in self.coeffs.iter().enumerate() {
            if m > 0 && m % 64 == 0 {
                // Re-anchor the recurrence to keep phase error at roundoff.
                z = Complex64::from_polar(1.0, self.dxi * x * (m + 1) as f64);
            }
            acc += (a * z).re;
            z *= step;
        }
        let mut v = self.dc + acc;
        if let Some((a, xi)) = self.nyquist {
            v += a * (xi * x).cos();
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevSpec {
    s: f64,
    kappa: Option<f64>,
}

impl SobolevSpec {
    /// Weight `(1+ξ²)^s`, or `(ξ²+4κ²)^s` when `kappa` is given.
    pub fn new(s: f64, kappa: Option<f64>) -> Result<Self> {
        if !(-1.0..=1.0).contains(&s) {
            return Err(Error::InvalidInput(format!(
                "exponent s={s} outside [-1, 1]"
            )));
        }
        if let Some(k) = kappa {
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "kappa must be positive, got {k}"
                )));
            }
        }
        Ok(SobolevSpec { s, kappa })
    }

    pub fn l2() -> Self {
        SobolevSpec {
            s: 0.0,
            kappa: None,
        }
    }

    /// Plain `H^{-1}` with weight `(1+ξ²)^{-1}`.
    pub fn h_minus_one() -> Self {
        SobolevSpec {
            s: -1.0,
            kappa: None,
        }
    }

    pub fn h_minus_one_kappa(kappa: f64) -> Result<Self> {
        SobolevSpec::new(-1.0, Some(kappa))
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    pub fn weight(&self, xi: f64) -> f64 {
        let base = match self.kappa {
            Some(k) => xi * xi + 4.0 * k * k,
            None => 1.0 + xi * xi,
        };
        if self.s == 0.0 {
            1.0
        } else if self.s == -1.0 {
            1.0 / base
        } else if self.s == 1.0 {
            base
        } else {
            base.powf(self.s)
        }
    }
}

pub fn norm_sq(field: &Field, spec: &SobolevSpec) -> f64 {
    let g = field.grid();
    let sum: f64 = field
        .spectrum()
        .iter()
        .enumerate()
        .map(|(m, z)| spec.weight(g.frequency(m)) * z.norm_sqr())
        .sum();
    g.dxi() * sum
}

pub fn norm(field: &Field, spec: &SobolevSpec) -> f64 {
    norm_sq(field, spec).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpMode {
    /// `N/2 < |ξ| ≤ N`
    At,
    /// `|ξ| ≤ N`
    Below,
    /// complement of `Below`
    Above,
}

fn check_dyadic(grid: &Grid, n: f64) -> Result<()> {
    if !(n.is_finite() && n > 0.0) || n.log2().round().exp2() != n {
        return Err(Error::OutOfBand(format!("{n} is not a power of two")));
    }
    let (lo, hi) = grid.dyadic_range();
    if n < lo || n > hi {
        return Err(Error::OutOfBand(format!(
            "N = {n} outside the resolved range [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Sharp dyadic projection. `Below` and `At` drop the Nyquist mode; `Above`
/// is the exact complement of `Below`, so `Below + Above` is the identity.
pub fn lp_project(field: &Field, n: f64, mode: LpMode) -> Result<Field> {
    let g = *field.grid();
    check_dyadic(&g, n)?;
    let nyq = g.nyquist_index();
    let keep_below = |m: usize| m != nyq && g.frequency(m).abs() <= n;
    let keep: Box<dyn Fn(usize) -> bool> = match mode {
        LpMode::Below => Box::new(keep_below),
        LpMode::Above => Box::new(move |m| !keep_below(m)),
        LpMode::At => Box::new(move |m| {
            let a = g.frequency(m).abs();
            m != nyq && a <= n && a > 0.5 * n
        }),
    };
    let zero = Complex64::new(0.0, 0.0);
    let s: Vec<Complex64> = field
        .spectrum()
        .iter()
        .enumerate()
        .map(|(m, &z)| if keep(m) { z } else { zero })
        .collect();
    Field::from_spectrum(g, &s)
}

/// Constant in `‖P_{≤N} f‖_∞ ≤ C ‖f‖_{L²}` for the sharp discrete projection:
/// `C = (N/π + 1/L)^{1/2}`.
pub fn bernstein_constant(grid: &Grid, n: f64) -> f64 {
    (n / PI + 1.0 / grid.length()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2pi(m: usize) -> Grid {
        Grid::new(2.0 * PI, m).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1.0, 4).is_err());
        assert!(Grid::new(1.0, 12).is_err());
        assert!(Grid::new(-1.0, 16).is_err());
        assert!(Grid::new(f64::NAN, 16).is_err());
        let g = Grid::new(10.0, 16).unwrap();
        assert_eq!(g.signed_index(8), -8);
        assert_eq!(g.signed_index(7), 7);
        assert_eq!(g.slot(-8), Some(8));
        assert_eq!(g.slot(8), None);
        assert_eq!(g.node(0), -5.0);
    }

    #[test]
    fn non_finite_samples_rejected() {
        let g = g2pi(8);
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(
            Field::new(g, v.clone()),
            Err(Error::InvalidInput(_))
        ));
        assert!(forward_transform(&g, &v).is_err());
    }

    #[test]
    fn constant_has_only_dc() {
        let g = g2pi(8);
        let f = Field::from_fn(g, |_| 1.0).unwrap();
        let s = f.spectrum();
        // ∫ e^{0} dx / √(2π) = 2π/√(2π)
        assert!((s[0].re - (2.0 * PI).sqrt()).abs() < 1e-14);
        for z in &s[1..] {
            assert!(z.norm() < 1e-14);
        }
    }

    #[test]
    fn cosine_splits_evenly() {
        let g = g2pi(8);
        let f = Field::from_fn(g, f64::cos).unwrap();
        let s = f.spectrum();
        let p = s[g.slot(1).unwrap()];
        let n = s[g.slot(-1).unwrap()];
        assert!((p.norm() - n.norm()).abs() < 1e-14);
        assert!((p.norm() - (PI / 2.0).sqrt()).abs() < 1e-14);
        for (m, z) in s.iter().enumerate() {
            if g.signed_index(m).abs() != 1 {
                assert!(z.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn cosine_h_minus_one_kappa_weight() {
        let g = g2pi(8);
        let f = Field::from_fn(g, f64::cos).unwrap();
        let spec = SobolevSpec::h_minus_one_kappa(1.0).unwrap();
        assert!((norm_sq(&f, &spec) - f.l2_norm_sq() / 5.0).abs() < 1e-14);
        assert_eq!(norm(&Field::zeros(g), &spec), 0.0);
    }

    #[test]
    fn derivative_and_translate() {
        let g = Grid::new(2.0 * PI, 32).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * x).sin()).unwrap();
        let d = f.derivative(1);
        let t = f.translate(0.3);
        for (j, x) in g.nodes().into_iter().enumerate() {
            assert!((d.samples()[j] - 2.0 * (2.0 * x).cos()).abs() < 1e-12);
            assert!((t.samples()[j] - (2.0 * (x - 0.3)).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolant_matches_function_off_grid() {
        let g = Grid::new(20.0, 128).unwrap();
        let f = Field::from_fn(g, |x| (-x * x).exp()).unwrap();
        let ip = f.interpolant(1e-18);
        for &x in &[-3.3, -0.71, 0.0, 0.123, 2.5] {
            assert!((ip.eval(x) - (-x * x).exp()).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn dyadic_range_bounds() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let (lo, hi) = g.dyadic_range();
        assert_eq!(lo, 0.5);
        assert_eq!(hi, 32.0);
        assert!(lp_project(&Field::zeros(g), 64.0, LpMode::Below).is_err());
        assert!(lp_project(&Field::zeros(g), 3.0, LpMode::Below).is_err());
        assert!(lp_project(&Field::zeros(g), 0.25, LpMode::At).is_err());
    }

    #[test]
    fn low_mode_unchanged_by_projection() {
        let g = Grid::new(2.0 * PI, 64).unwrap();
        let f = Field::from_fn(g, |x| (2.0 * x).cos()).unwrap();
        let p = lp_project(&f, 4.0, LpMode::Below).unwrap();
        let d = p.sub(&f).unwrap();
        assert!(d.sup_norm() < 1e-14);
    }

    #[test]
    fn sobolev_spec_validation() {
        assert!(SobolevSpec::new(1.5, None).is_err());
        assert!(SobolevSpec::new(0.0, Some(0.0)).is_err());
        assert!(SobolevSpec::new(0.5, Some(2.0)).is_ok());
    }
}
