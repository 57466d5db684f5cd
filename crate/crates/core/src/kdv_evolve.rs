//! Pseudospectral integrator for `q_t = -q_xxx + 6 q q_x` on the periodic box.
//!
//! In Fourier space `v_t = iξ³ v + 3iξ F[q²]`. The linear part is propagated
//! exactly and the nonlinear part by fourth-order exponential time differencing
//! (Cox–Matthews, with contour-averaged φ-functions). The quadratic product is
//! dealiased by the 2/3 rule and the Nyquist mode is kept at zero so the
//! spectrum stays Hermitian.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{field_bytes, field_csv, write_atomic};
use crate::multisoliton::functionals;
use crate::spectral_grid::{FftPair, Field, Grid};
use crate::spectral_invariants::alpha::{alpha_det2, WindowOptions};

const CONTOUR_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    Abort,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    /// Largest step magnitude; the step actually used divides the horizon evenly.
    pub dt: f64,
    /// Advective bound `|dt|·3·ξ_max·max|q| ≤ cfl`, `ξ_max` the largest
    /// retained frequency. Infinity disables the check.
    pub cfl: f64,
    pub boundary_tol: f64,
    /// Share of the box on each side watched by the boundary check.
    pub boundary_fraction: f64,
    pub boundary_policy: BoundaryPolicy,
    /// Stored states, endpoints included.
    pub samples: usize,
    /// Steps between conservation checks; `0` checks at stored states only.
    pub monitor_every: usize,
    /// Window search for the `α` monitors at `t = 0`; later checks reuse that window.
    pub alpha_window: WindowOptions,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            dt: 1e-3,
            cfl: 1.0,
            boundary_tol: 1e-10,
            boundary_fraction: 0.01,
            boundary_policy: BoundaryPolicy::Abort,
            samples: 11,
            monitor_every: 0,
            alpha_window: WindowOptions::default(),
        }
    }
}

/// Conserved quantities; `alpha[i]` is `α(κ_i; q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    pub integral: f64,
    pub momentum: f64,
    pub energy: f64,
    pub alpha: Vec<f64>,
}

impl Conserved {
    /// `|a - b| / max(|b|, floor)` per component, `b` the reference.
    fn drift_from(&self, b: &Conserved, floor: f64) -> Conserved {
        let d = |x: f64, y: f64| (x - y).abs() / y.abs().max(floor);
        Conserved {
            integral: d(self.integral, b.integral),
            momentum: d(self.momentum, b.momentum),
            energy: d(self.energy, b.energy),
            alpha: self
                .alpha
                .iter()
                .zip(&b.alpha)
                .map(|(x, y)| d(*x, *y))
                .collect(),
        }
    }

    fn max_with(&mut self, o: &Conserved) {
        self.integral = self.integral.max(o.integral);
        self.momentum = self.momentum.max(o.momentum);
        self.energy = self.energy.max(o.energy);
        for (a, b) in self.alpha.iter_mut().zip(&o.alpha) {
            *a = a.max(*b);
        }
    }

    pub fn max_component(&self) -> f64 {
        self.alpha
            .iter()
            .fold(self.integral.max(self.momentum).max(self.energy), |m, v| {
                m.max(*v)
            })
    }
}

/// Conservation history. Drifts are relative to the `t = 0` values, with
/// absolute differences used where those are below the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftLog {
    pub kappas: Vec<f64>,
    /// Frequency half width of the `α` windows, one per `κ`.
    pub alpha_half_widths: Vec<usize>,
    pub floor: f64,
    pub baseline: Conserved,
    pub history: Vec<(f64, Conserved)>,
    pub max_drift: Conserved,
}

impl DriftLog {
    fn new(q: &Field, kappas: &[f64], window: &WindowOptions) -> Result<Self> {
        let mut alpha = vec![];
        let mut widths = vec![];
        for &k in kappas {
            let a = alpha_det2(q, k, window)?;
            alpha.push(a.value);
            widths.push(a.half_width);
        }
        let f = functionals(q);
        let baseline = Conserved {
            integral: f.integral,
            momentum: f.momentum,
            energy: f.energy,
            alpha,
        };
        Ok(DriftLog {
            kappas: kappas.to_vec(),
            alpha_half_widths: widths,
            floor: 1e-12,
            max_drift: Conserved {
                integral: 0.0,
                momentum: 0.0,
                energy: 0.0,
                alpha: vec![0.0; kappas.len()],
            },
            history: vec![(0.0, baseline.clone())],
            baseline,
        })
    }

    fn record(&mut self, t: f64, q: &Field) -> Result<()> {
        let mut alpha = vec![];
        for (&k, &p) in self.kappas.iter().zip(&self.alpha_half_widths) {
            let opts = WindowOptions {
                fixed_half_width: Some(p),
                max_dim: usize::MAX,
                ..WindowOptions::default()
            };
            alpha.push(alpha_det2(q, k, &opts)?.value);
        }
        let f = functionals(q);
        let now = Conserved {
            integral: f.integral,
            momentum: f.momentum,
            energy: f.energy,
            alpha,
        };
        let d = now.drift_from(&self.baseline, self.floor);
        if !d.max_component().is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite conserved quantity at t = {t}"
            )));
        }
        self.max_drift.max_with(&d);
        self.history.push((t, now));
        Ok(())
    }
}

/// Exponential time-differencing coefficients for one grid and step.
#[derive(Debug)]
struct Etd {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
    /// `3iξ` on retained modes, zero elsewhere.
    nl: Vec<Complex64>,
    mask: Vec<bool>,
    xi_max: f64,
}

impl Etd {
    fn new(grid: &Grid, h: f64) -> Self {
        let m = grid.points();
        let i = Complex64::new(0.0, 1.0);
        let roots: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|j| {
                let th = std::f64::consts::PI * (2.0 * j as f64 + 1.0) / CONTOUR_POINTS as f64;
                Complex64::from_polar(1.0, th)
            })
            .collect();
        let mean = |f: &dyn Fn(Complex64) -> Complex64, z0: Complex64| {
            roots.iter().map(|r| f(z0 + r)).sum::<Complex64>() / CONTOUR_POINTS as f64
        };
        let nyq = grid.nyquist_index();
        let mut out = Etd {
            e: Vec::with_capacity(m),
            e2: Vec::with_capacity(m),
            q: Vec::with_capacity(m),
            f1: Vec::with_capacity(m),
            f2: Vec::with_capacity(m),
            f3: Vec::with_capacity(m),
            nl: Vec::with_capacity(m),
            mask: Vec::with_capacity(m),
            xi_max: 0.0,
        };
        for j in 0..m {
            let xi = grid.frequency(j);
            let keep = j != nyq && 3 * grid.signed_index(j).unsigned_abs() < m as u64;
            // The Nyquist mode has no Hermitian partner; it is frozen at zero.
            let lin = if j == nyq { 0.0 } else { xi * xi * xi };
            let z = i * h * lin;
            out.e.push(z.exp());
            out.e2.push((z / 2.0).exp());
            out.q
                .push(h * mean(&|w: Complex64| ((w / 2.0).exp() - 1.0) / w, z));
            out.f1.push(
                h * mean(
                    &|w: Complex64| (-4.0 - w + w.exp() * (4.0 - 3.0 * w + w * w)) / w.powu(3),
                    z,
                ),
            );
            out.f2.push(
                h * mean(
                    &|w: Complex64| (2.0 + w + w.exp() * (w - 2.0)) / w.powu(3),
                    z,
                ),
            );
            out.f3.push(
                h * mean(
                    &|w: Complex64| (-4.0 - 3.0 * w - w * w + w.exp() * (4.0 - w)) / w.powu(3),
                    z,
                ),
            );
            out.nl.push(if keep {
                Complex64::new(0.0, 3.0 * xi)
            } else {
                Complex64::new(0.0, 0.0)
            });
            out.mask.push(keep);
            if keep {
                out.xi_max = out.xi_max.max(xi.abs());
            }
        }
        out
    }
}

/// One trajectory's state. Time moves in the direction of `dt`.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    grid: Grid,
    /// Unnormalized FFT coefficients of `q`.
    spectrum: Vec<Complex64>,
    t: f64,
    t0: f64,
    dt: f64,
    steps: usize,
    cfl: f64,
    etd: Arc<Etd>,
    fft: FftPair,
    drift: Option<DriftLog>,
    /// Samples of `q` at the start of the last step.
    last_samples: Vec<f64>,
}

impl EvolutionState {
    pub fn new(q0: &Field, dt: f64, cfl: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidInput(format!(
                "dt must be finite and nonzero, got {dt}"
            )));
        }
        if !(cfl > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cfl must be positive, got {cfl}"
            )));
        }
        let grid = *q0.grid();
        let m = grid.points();
        let fft = FftPair::new(m);
        let mut spectrum: Vec<Complex64> = q0
            .samples()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft.forward(&mut spectrum);
        spectrum[grid.nyquist_index()] = Complex64::new(0.0, 0.0);
        let etd = Arc::new(Etd::new(&grid, dt));
        let s = EvolutionState {
            grid,
            spectrum,
            t: 0.0,
            t0: 0.0,
            dt,
            steps: 0,
            cfl,
            etd,
            fft,
            drift: None,
            last_samples: q0.samples().to_vec(),
        };
        let number = s.cfl_number(q0.sup_norm());
        if number > cfl {
            return Err(Error::InvalidInput(format!(
                "|dt|·3·ξ_max·max|q| = {number:.3} exceeds the bound {cfl}"
            )));
        }
        Ok(s)
    }

    /// Starts a conservation log at the current state.
    pub fn with_monitors(mut self, kappas: &[f64], window: &WindowOptions) -> Result<Self> {
        self.drift = Some(DriftLog::new(&self.field()?, kappas, window)?);
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Unnormalized FFT coefficients of `q`.
    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// Modes retained by the dealiasing rule, in FFT order.
    pub fn mask(&self) -> &[bool] {
        &self.etd.mask
    }

    pub fn drift(&self) -> Option<&DriftLog> {
        self.drift.as_ref()
    }

    fn cfl_number(&self, sup: f64) -> f64 {
        self.dt.abs() * 3.0 * self.etd.xi_max * sup
    }

    fn samples_of(&self, v: &[Complex64]) -> Vec<f64> {
        let mut buf = v.to_vec();
        self.fft.inverse(&mut buf);
        let m = self.grid.points() as f64;
        buf.iter().map(|c| c.re / m).collect()
    }

    pub fn field(&self) -> Result<Field> {
        Field::new(self.grid, self.samples_of(&self.spectrum))
    }

    /// `3iξ F[q²]` on retained modes, and the samples of `q`.
    fn nonlinear(&self, v: &[Complex64]) -> (Vec<Complex64>, Vec<f64>) {
        let q = self.samples_of(v);
        let mut buf: Vec<Complex64> = q.iter().map(|&x| Complex64::new(x * x, 0.0)).collect();
        self.fft.forward(&mut buf);
        for (b, g) in buf.iter_mut().zip(&self.etd.nl) {
            *b *= g;
        }
        (buf, q)
    }

    /// Largest `|q|` near either end of the box at the start of the last step.
    pub fn boundary_amplitude(&self, fraction: f64) -> f64 {
        let m = self.grid.points();
        let band = ((fraction * m as f64).ceil() as usize).clamp(1, m / 2);
        let s = &self.last_samples;
        s[..band]
            .iter()
            .chain(&s[m - band..])
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Advances one step in place.
    pub fn advance(&mut self) -> Result<()> {
        let etd = self.etd.clone();
        let v = &self.spectrum;
        let (nv, q) = self.nonlinear(v);
        let sup = q.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if !sup.is_finite() {
            return Err(self.blow_up());
        }
        let number = self.cfl_number(sup);
        if number > self.cfl {
            return Err(Error::NumericalFailure(format!(
                "step bound violated at t = {}: |dt|·3·ξ_max·max|q| = {number:.3} > {}",
                self.t, self.cfl
            )));
        }
        self.last_samples = q;
        let a: Vec<Complex64> = (0..v.len())
            .map(|j| etd.e2[j] * v[j] + etd.q[j] * nv[j])
            .collect();
        let (na, _) = self.nonlinear(&a);
        let b: Vec<Complex64> = (0..v.len())
            .map(|j| etd.e2[j] * v[j] + etd.q[j] * na[j])
            .collect();
        let (nb, _) = self.nonlinear(&b);
        let c: Vec<Complex64> = (0..v.len())
            .map(|j| etd.e2[j] * a[j] + etd.q[j] * (2.0 * nb[j] - nv[j]))
            .collect();
        let (nc, _) = self.nonlinear(&c);
        let next: Vec<Complex64> = (0..v.len())
            .map(|j| {
                etd.e[j] * v[j]
                    + etd.f1[j] * nv[j]
                    + 2.0 * etd.f2[j] * (na[j] + nb[j])
                    + etd.f3[j] * nc[j]
            })
            .collect();
        if next.iter().any(|z| !z.is_finite()) {
            return Err(self.blow_up());
        }
        self.spectrum = next;
        self.steps += 1;
        self.t = self.t0 + self.steps as f64 * self.dt;
        Ok(())
    }

    fn blow_up(&self) -> Error {
        Error::BlowUp {
            time: self.t + self.dt,
            last_valid_time: self.t,
            last_valid: self.samples_of(&self.spectrum),
        }
    }

    /// Appends the conserved quantities at the current time to the log.
    pub fn record_drift(&mut self) -> Result<()> {
        let q = self.field()?;
        if let Some(d) = self.drift.as_mut() {
            d.record(self.t, &q)?;
        }
        Ok(())
    }
}

/// One step of the integrator.
pub fn step(mut state: EvolutionState) -> Result<EvolutionState> {
    state.advance()?;
    Ok(state)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub dt: f64,
    pub steps: usize,
    pub drift: DriftLog,
    /// Largest boundary amplitude seen at any step.
    pub boundary_max: f64,
    /// First time the boundary amplitude exceeded its tolerance, under the warn policy.
    pub boundary_exceeded_at: Option<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &Field {
        self.states
            .last()
            .expect("a trajectory holds at least its initial state")
    }
}

/// Evolves `q0` to `t_final` (negative runs backward), storing
/// `cfg.samples` evenly spaced states and monitoring `∫q`, `P`, `H` and
/// `α(κ)` for each `κ` in `kappas`.
pub fn evolve(q0: &Field, t_final: f64, kappas: &[f64], cfg: &EvolveConfig) -> Result<Trajectory> {
    if !t_final.is_finite() {
        return Err(Error::InvalidInput(format!(
            "t_final must be finite, got {t_final}"
        )));
    }
    if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
        return Err(Error::InvalidInput(format!(
            "dt must be positive, got {}",
            cfg.dt
        )));
    }
    if cfg.samples < 2 {
        return Err(Error::InvalidInput(
            "at least two samples are required".into(),
        ));
    }
    if !(cfg.boundary_fraction > 0.0 && cfg.boundary_fraction < 0.5) {
        return Err(Error::InvalidInput(format!(
            "boundary fraction must lie in (0, 0.5), got {}",
            cfg.boundary_fraction
        )));
    }
    let segments = cfg.samples - 1;
    let mut n = (t_final.abs() / cfg.dt).ceil() as usize;
    n = n.max(1).div_ceil(segments) * segments;
    let dt = if t_final == 0.0 {
        cfg.dt
    } else {
        t_final / n as f64
    };
    let mut state =
        EvolutionState::new(q0, dt, cfg.cfl)?.with_monitors(kappas, &cfg.alpha_window)?;

    let mut times = vec![0.0];
    let mut states = vec![state.field()?];
    let mut boundary_max = q0.boundary_amplitude(cfg.boundary_fraction);
    let mut exceeded = None;
    let mut check_boundary = |amp: f64, t: f64| -> Result<()> {
        boundary_max = boundary_max.max(amp);
        if amp > cfg.boundary_tol {
            match cfg.boundary_policy {
                BoundaryPolicy::Abort => {
                    return Err(Error::DomainTooSmall(format!(
                        "boundary amplitude {amp:e} exceeds {:e} at t = {t}",
                        cfg.boundary_tol
                    )))
                }
                BoundaryPolicy::Warn => {
                    if exceeded.is_none() {
                        log::warn!("boundary amplitude {amp:e} exceeds tolerance at t = {t}");
                        exceeded = Some(t);
                    }
                }
            }
        }
        Ok(())
    };
    check_boundary(q0.boundary_amplitude(cfg.boundary_fraction), 0.0)?;
    if t_final != 0.0 {
        let per_sample = n / segments;
        for s in 1..=n {
            state.advance()?;
            check_boundary(
                state.boundary_amplitude(cfg.boundary_fraction),
                state.t() - dt,
            )?;
            let at_sample = s % per_sample == 0;
            if at_sample || (cfg.monitor_every > 0 && s % cfg.monitor_every == 0) {
                state.record_drift()?;
            }
            if at_sample {
                // Exact multiple of dt avoids accumulated rounding in the reported times.
                times.push(s as f64 * dt);
                let f = state.field()?;
                check_boundary(f.boundary_amplitude(cfg.boundary_fraction), s as f64 * dt)?;
                states.push(f);
            }
        }
    }
    let drift = state.drift.take().expect("monitors were attached above");
    Ok(Trajectory {
        times,
        states,
        dt,
        steps: state.steps(),
        drift,
        boundary_max,
        boundary_exceeded_at: exceeded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckpointFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub length: f64,
    pub points: usize,
    pub dt: f64,
    pub t: f64,
    pub format: CheckpointFormat,
    pub max_drift: Option<Conserved>,
    pub kappas: Vec<f64>,
}

/// Writes `<stem>.csv` or `<stem>.bin` with the samples and `<stem>.json`
/// with the metadata.
pub fn write_checkpoint(
    stem: &Path,
    q: &Field,
    t: f64,
    dt: f64,
    drift: Option<&DriftLog>,
    format: CheckpointFormat,
) -> Result<CheckpointMeta> {
    let meta = CheckpointMeta {
        length: q.grid().length(),
        points: q.grid().points(),
        dt,
        t,
        format,
        max_drift: drift.map(|d| d.max_drift.clone()),
        kappas: drift.map(|d| d.kappas.clone()).unwrap_or_default(),
    };
    match format {
        CheckpointFormat::Csv => {
            write_atomic(&stem.with_extension("csv"), field_csv(q).as_bytes())?
        }
        CheckpointFormat::Binary => write_atomic(&stem.with_extension("bin"), &field_bytes(q))?,
    }
    write_atomic(
        &stem.with_extension("json"),
        serde_json::to_string_pretty(&meta)?.as_bytes(),
    )?;
    Ok(meta)
}

pub fn read_checkpoint(stem: &Path) -> Result<(Field, CheckpointMeta)> {
    let meta: CheckpointMeta =
        serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
    let q = match meta.format {
        CheckpointFormat::Csv => crate::io::parse_field_csv(
            &std::fs::read_to_string(stem.with_extension("csv"))?,
            meta.length,
        )?,
        CheckpointFormat::Binary => {
            crate::io::parse_field_bytes(&std::fs::read(stem.with_extension("bin"))?, meta.length)?
        }
    };
    if q.grid().points() != meta.points {
        return Err(Error::Io(format!(
            "checkpoint holds {} samples, metadata says {}",
            q.grid().points(),
            meta.points
        )));
    }
    Ok((q, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multisoliton::one_soliton;

    #[test]
    fn zero_stays_zero() {
        let g = Grid::new(20.0, 64).unwrap();
        let s = step(EvolutionState::new(&Field::zeros(g), 1e-2, 1.0).unwrap()).unwrap();
        assert!(s.field().unwrap().samples().iter().all(|v| *v == 0.0));
        assert!((s.t() - 1e-2).abs() < 1e-16);
    }

    #[test]
    fn mask_keeps_lower_two_thirds() {
        let g = Grid::new(20.0, 96 / 3 * 2).unwrap();
        let s = EvolutionState::new(&Field::zeros(g), 1e-2, 1.0).unwrap();
        let m = g.points() as i64;
        for (j, keep) in s.mask().iter().enumerate() {
            assert_eq!(
                *keep,
                3 * g.signed_index(j).abs() < m && j != g.nyquist_index()
            );
        }
    }

    #[test]
    fn rejects_large_steps() {
        let g = Grid::new(60.0, 1024).unwrap();
        let q = one_soliton(1.0, 0.0, 0.0, &g).unwrap();
        assert!(EvolutionState::new(&q, 0.1, 1.0).is_err());
    }

    #[test]
    fn soliton_translates() {
        let g = Grid::new(60.0, 1024).unwrap();
        let q = one_soliton(1.0, -5.0, 0.0, &g).unwrap();
        let cfg = EvolveConfig {
            dt: 5e-4,
            samples: 3,
            ..Default::default()
        };
        let tr = evolve(&q, 0.5, &[], &cfg).unwrap();
        let exact = one_soliton(1.0, -5.0, 0.5, &g).unwrap();
        let err = tr.final_state().sub(&exact).unwrap().l2_norm();
        assert!(err < 1e-7, "{err}");
        assert_eq!(tr.times.len(), 3);
        assert!(tr.drift.max_drift.max_component() < 1e-9);
    }

    #[test]
    fn checkpoint_round_trip() {
        let g = Grid::new(40.0, 64).unwrap();
        let q = one_soliton(1.0, 0.0, 0.0, &g).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for fmt in [CheckpointFormat::Csv, CheckpointFormat::Binary] {
            let stem = dir.path().join("ck");
            write_checkpoint(&stem, &q, 0.25, 1e-3, None, fmt).unwrap();
            let (back, meta) = read_checkpoint(&stem).unwrap();
            assert_eq!(back.samples(), q.samples());
            assert_eq!(meta.t, 0.25);
        }
    }
}
