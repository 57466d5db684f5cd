//! `α(κ;q) = -ln det₂(1 + K(iκ))` by the trace series and by the regularized
//! determinant, and `a_ren(k) = det₂(1 + K(k))` off the imaginary axis.
//!
//! Both routes work on a finite frequency window `|ξ| ≤ Ξ`. The window misses
//! a tail of `‖K‖²_{I₂}` that decays only like `Ξ^{-3}`, far too slowly to cut
//! away, so the quadratic and cubic traces of the window are replaced by the
//! exact operator traces. What remains decays like `Ξ^{-7}`; the window grows
//! by `4/3` until two consecutive windows agree to within the error budget.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::kmatrix::{check_k, operator_hs_norm, operator_trace_cube, operator_trace_sq, KMatrix};
use crate::error::{Error, Result};
use crate::spectral_grid::{norm_sq, Field, SobolevSpec};

/// The trace series is trusted only while `‖K‖_{I₂}` stays below this.
pub const SERIES_RATIO_MAX: f64 = 0.9;

const GROWTH: f64 = 4.0 / 3.0;
const DECAY_ORDER: i32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOptions {
    /// Absolute error budget on `ln det₂`.
    pub budget: f64,
    /// Largest admissible matrix dimension.
    pub max_dim: usize,
    /// Starting cutoff `Ξ`; chosen from `|k|` when absent.
    pub initial_cutoff: Option<f64>,
    /// Skip the adaptive search and use this half width.
    pub fixed_half_width: Option<usize>,
}

impl Default for WindowOptions {
    fn default() -> Self {
        WindowOptions {
            budget: 1e-11,
            max_dim: 2601,
            initial_cutoff: None,
            fixed_half_width: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Det2Estimate {
    /// Corrected `ln det₂(1 + K)` (imaginary part defined mod 2π).
    pub log_det2: Complex64,
    /// Difference-based estimate of the remaining window error, if computed.
    pub error_estimate: Option<f64>,
    pub half_width: usize,
    pub cutoff: f64,
}

impl Det2Estimate {
    pub fn value(&self) -> Complex64 {
        self.log_det2.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub value: f64,
    pub error_estimate: Option<f64>,
    pub half_width: usize,
    pub cutoff: f64,
    /// `‖K‖_{I₂}` of the full operator.
    pub hs_norm: f64,
    /// Highest power summed by the series route.
    pub series_terms: Option<usize>,
}

struct FullTraces {
    t2: Complex64,
    t3: Complex64,
}

fn full_traces(q: &Field, k: Complex64) -> Result<FullTraces> {
    Ok(FullTraces {
        t2: operator_trace_sq(q, k)?,
        t3: operator_trace_cube(q, k)?,
    })
}

fn half_width_for(q: &Field, cutoff: f64) -> usize {
    ((cutoff / q.grid().dxi()).ceil() as usize).max(4)
}

/// `ln det(M)` of a real matrix via LU: `(ln|det|, negative sign?)`.
fn real_log_det(m: DMatrix<f64>) -> Result<(f64, bool)> {
    let lu = m.lu();
    let u = lu.u();
    let mut logabs = 0.0;
    let mut neg = false;
    for d in u.diagonal().iter() {
        if *d == 0.0 || !d.is_finite() {
            return Err(Error::NumericalFailure("singular 1 + K".into()));
        }
        logabs += d.abs().ln();
        neg ^= *d < 0.0;
    }
    neg ^= lu.p().determinant::<f64>() < 0.0;
    Ok((logabs, neg))
}

fn complex_log_det(m: DMatrix<Complex64>) -> Result<Complex64> {
    let lu = m.lu();
    let u = lu.u();
    let mut s = Complex64::new(0.0, 0.0);
    for d in u.diagonal().iter() {
        if d.norm() == 0.0 || !d.is_finite() {
            return Err(Error::NumericalFailure("singular 1 + K".into()));
        }
        s += d.ln();
    }
    if lu.p().determinant::<f64>() < 0.0 {
        s += Complex64::new(0.0, std::f64::consts::PI);
    }
    Ok(s)
}

/// Window matrix in the cheapest available form.
enum Window {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

fn window(q: &Field, k: Complex64, half_width: usize) -> Result<Window> {
    let km = KMatrix::with_window(q, k, half_width)?;
    if k.re == 0.0 {
        Ok(Window::Real(km.to_real_symmetric()?))
    } else {
        Ok(Window::Complex(km.entries().clone()))
    }
}

/// Corrected `ln det₂(1 + K)` at a given window.
fn corrected_log_det2(
    q: &Field,
    k: Complex64,
    half_width: usize,
    full: &FullTraces,
) -> Result<Complex64> {
    let (logdet, t1, t2, t3) = match window(q, k, half_width)? {
        Window::Real(r) => {
            let n = r.nrows();
            let t1 = r.trace();
            let r2 = &r * &r;
            let t2 = r.iter().map(|v| v * v).sum::<f64>();
            let t3 = r2.iter().zip(r.iter()).map(|(a, b)| a * b).sum::<f64>();
            let (logabs, neg) = real_log_det(DMatrix::identity(n, n) + r)?;
            let ld = Complex64::new(logabs, if neg { std::f64::consts::PI } else { 0.0 });
            (
                ld,
                Complex64::from(t1),
                Complex64::from(t2),
                Complex64::from(t3),
            )
        }
        Window::Complex(m) => {
            let n = m.nrows();
            let t1 = m.trace();
            let m2 = &m * &m;
            let t2 = m2.trace();
            let t3 = (&m2 * &m).trace();
            let ld = complex_log_det(DMatrix::identity(n, n) + m)?;
            (ld, t1, t2, t3)
        }
    };
    Ok(logdet - t1 - 0.5 * (full.t2 - t2) + (full.t3 - t3) / 3.0)
}

fn default_cutoff(k: Complex64, scale: f64) -> f64 {
    (3.0 * k.norm().max(scale)).max(30.0)
}

fn select_window(
    q: &Field,
    k: Complex64,
    opts: &WindowOptions,
    full: &FullTraces,
    scale: f64,
) -> Result<Det2Estimate> {
    let dxi = q.grid().dxi();
    if let Some(p) = opts.fixed_half_width {
        if 2 * p + 1 > opts.max_dim {
            return Err(Error::Resolution(format!(
                "window of half width {p} exceeds max_dim"
            )));
        }
        return Ok(Det2Estimate {
            log_det2: corrected_log_det2(q, k, p, full)?,
            error_estimate: None,
            half_width: p,
            cutoff: p as f64 * dxi,
        });
    }
    let mut p = half_width_for(
        q,
        opts.initial_cutoff
            .unwrap_or_else(|| default_cutoff(k, scale)),
    );
    let mut small_p = ((p as f64) / GROWTH).ceil() as usize;
    if 2 * p + 1 > opts.max_dim {
        return Err(Error::Resolution(format!(
            "initial window of dimension {} exceeds max_dim {}",
            2 * p + 1,
            opts.max_dim
        )));
    }
    let mut small = corrected_log_det2(q, k, small_p, full)?;
    loop {
        let big = corrected_log_det2(q, k, p, full)?;
        let ratio = (p as f64 / small_p as f64).powi(DECAY_ORDER);
        let est = (big - small).norm() / (ratio - 1.0);
        if est <= opts.budget {
            return Ok(Det2Estimate {
                log_det2: big,
                error_estimate: Some(est),
                half_width: p,
                cutoff: p as f64 * dxi,
            });
        }
        let next = ((p as f64) * GROWTH).ceil() as usize;
        if 2 * next + 1 > opts.max_dim {
            return Err(Error::Resolution(format!(
                "window error estimate {est:e} above budget {:e} at the largest admissible \
                 dimension {}",
                opts.budget,
                2 * p + 1
            )));
        }
        small_p = p;
        small = big;
        p = next;
    }
}

/// Corrected `ln det₂(1 + K(k))` with its window diagnostics.
pub fn log_det2(q: &Field, k: Complex64, opts: &WindowOptions) -> Result<Det2Estimate> {
    check_k(k)?;
    let full = full_traces(q, k)?;
    select_window(q, k, opts, &full, 0.0)
}

/// `a_ren(k) = det₂(1 + √R₀(k) q √R₀(k))`. `kappa_equiv` is the spectral scale
/// used to size the first frequency window (at least `3·max(|k|, kappa_equiv)`).
pub fn a_ren_det2(q: &Field, k: Complex64, kappa_equiv: f64) -> Result<Complex64> {
    check_k(k)?;
    if !(kappa_equiv.is_finite() && kappa_equiv > 0.0) {
        return Err(Error::InvalidInput(format!(
            "kappa_equiv must be positive, got {kappa_equiv}"
        )));
    }
    let full = full_traces(q, k)?;
    Ok(select_window(q, k, &WindowOptions::default(), &full, kappa_equiv)?.value())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidInput(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    Ok(())
}

/// `α(κ;q)` from the regularized determinant. Fails with `OutOfDomain` when
/// `a_ren(iκ) ≤ 0`, i.e. when `κ` lies below an odd number of bound states.
pub fn alpha_det2(q: &Field, kappa: f64, opts: &WindowOptions) -> Result<AlphaEstimate> {
    check_kappa(kappa)?;
    let k = Complex64::new(0.0, kappa);
    let full = full_traces(q, k)?;
    let est = select_window(q, k, opts, &full, kappa)?;
    if est.log_det2.im.abs() > 1.0 {
        return Err(Error::OutOfDomain(format!(
            "a_ren(iκ) is negative at κ = {kappa}; α is undefined there"
        )));
    }
    Ok(AlphaEstimate {
        value: -est.log_det2.re,
        error_estimate: est.error_estimate,
        half_width: est.half_width,
        cutoff: est.cutoff,
        hs_norm: full.t2.re.max(0.0).sqrt(),
        series_terms: None,
    })
}

/// Convergence diagnostics at `κ`. `h_minus_one_sq` uses the weight
/// `(1+ξ²)^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainReport {
    pub kappa: f64,
    pub h_minus_one_sq: f64,
    /// `1 + ‖q‖²_{H^{-1}}`
    pub strict_threshold: f64,
    /// `‖K(iκ)‖_{I₂}` of the full operator.
    pub hs_norm: f64,
    pub strict_ok: bool,
    pub series_ok: bool,
}

pub fn domain_report(q: &Field, kappa: f64) -> Result<DomainReport> {
    check_kappa(kappa)?;
    let h = norm_sq(q, &SobolevSpec::h_minus_one());
    let hs = operator_hs_norm(q, kappa)?;
    Ok(DomainReport {
        kappa,
        h_minus_one_sq: h,
        strict_threshold: 1.0 + h,
        hs_norm: hs,
        strict_ok: kappa >= 1.0 + h,
        series_ok: hs < SERIES_RATIO_MAX,
    })
}

/// `α(κ;q)` as `Σ_{ℓ≥2} (-1)^ℓ tr(K^ℓ)/ℓ`, summed until the geometric tail
/// bound `r^{n+1}/((n+1)(1-r))`, `r = ‖K‖_{I₂}`, drops below `tol`.
///
/// Requires `‖K‖_{I₂} < 0.9`; see [`domain_report`] for the plain `H^{-1}`
/// threshold `κ ≥ 1 + ‖q‖²_{H^{-1}}`, which is sufficient but far more
/// restrictive.
pub fn alpha_series(q: &Field, kappa: f64, tol: f64) -> Result<f64> {
    Ok(alpha_series_with(q, kappa, tol, &WindowOptions::default())?.value)
}

pub fn alpha_series_with(
    q: &Field,
    kappa: f64,
    tol: f64,
    opts: &WindowOptions,
) -> Result<AlphaEstimate> {
    check_kappa(kappa)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let k = Complex64::new(0.0, kappa);
    let full = full_traces(q, k)?;
    let r = full.t2.re.max(0.0).sqrt();
    if r >= SERIES_RATIO_MAX {
        return Err(Error::OutOfDomain(format!(
            "‖K‖_I₂ = {r:.4} at κ = {kappa}; the trace series needs it below {SERIES_RATIO_MAX}"
        )));
    }
    if r == 0.0 {
        return Ok(AlphaEstimate {
            value: 0.0,
            error_estimate: Some(0.0),
            half_width: 0,
            cutoff: 0.0,
            hs_norm: 0.0,
            series_terms: Some(1),
        });
    }
    let est = select_window(q, k, opts, &full, kappa)?;
    let mut top = 2usize;
    while r.powi(top as i32 + 1) / ((top + 1) as f64 * (1.0 - r)) >= tol {
        top += 1;
    }
    let Window::Real(m) = window(q, k, est.half_width)? else {
        unreachable!("imaginary axis")
    };
    // Powers up to ceil(top/2); tr K^{a+b} = Σ (K^a)∘(K^b) for symmetric powers.
    // The window correction always needs tr K³, hence K² at least.
    let half = top.max(3).div_ceil(2);
    let mut powers = vec![m.clone()];
    for _ in 1..half {
        let next = powers.last().unwrap() * &m;
        powers.push(next);
    }
    let trace_of = |l: usize| -> f64 {
        let a = l / 2;
        let b = l - a;
        powers[a - 1]
            .iter()
            .zip(powers[b - 1].iter())
            .map(|(x, y)| x * y)
            .sum()
    };
    let mut sum = 0.0;
    let mut t2w = 0.0;
    let mut t3w = 0.0;
    for l in 2..=top {
        let t = trace_of(l);
        if l == 2 {
            t2w = t;
        } else if l == 3 {
            t3w = t;
        }
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * t / l as f64;
    }
    if top < 3 {
        t3w = trace_of(3);
    }
    let value = sum + 0.5 * (full.t2.re - t2w) - (full.t3.re - t3w) / 3.0;
    Ok(AlphaEstimate {
        value,
        error_estimate: est.error_estimate,
        half_width: est.half_width,
        cutoff: est.cutoff,
        hs_norm: r,
        series_terms: Some(top),
    })
}

/// `G(x) = -[2x + ln((1-x)/(1+x))] = 2(artanh x - x)` in closed form.
pub fn g_closed_form(x: f64) -> f64 {
    2.0 * (x.atanh() - x)
}

/// `G(x) = Σ_{ℓ≥1} 2 x^{2ℓ+1}/(2ℓ+1)`, summed to machine precision.
pub fn g_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut p = x * x2;
    let mut s = 0.0;
    let mut l = 1;
    loop {
        let t = 2.0 * p / (2 * l + 1) as f64;
        s += t;
        if t <= 1e-17 * s {
            return s;
        }
        p *= x2;
        l += 1;
    }
}

/// `G` on `(0, 1)`, switching to the series where the closed form cancels.
pub fn g_function(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::OutOfDomain(format!(
            "G is defined on (0, 1), got {x}"
        )));
    }
    Ok(if x < 0.25 {
        g_series(x)
    } else {
        g_closed_form(x)
    })
}

/// `Σ_m G(β_m/κ)`: the value of `α(κ;·)` on any multisoliton with amplitudes `β`.
pub fn closed_form_alpha(betas: &[f64], kappa: f64) -> Result<f64> {
    betas.iter().map(|b| g_function(b / kappa)).sum()
}

/// `a(k)` of a multisoliton: `Π (k - iβ_m)/(k + iβ_m)`.
pub fn blaschke(betas: &[f64], k: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    betas.iter().map(|&b| (k - i * b) / (k + i * b)).product()
}
