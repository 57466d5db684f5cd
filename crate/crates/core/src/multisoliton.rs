//! N-soliton profiles `Q = -2 ∂ₓ² ln det A(x)` with
//! `A_{μν} = δ_{μν} + e^{-β_μ(x-c_μ) - β_ν(x-c_ν)}/(β_μ+β_ν)`.
//!
//! Evaluation works on a rescaled copy of `A`: every index with
//! `e_μ = e^{-β_μ(x-c_μ)} > 1` has its row and column divided by `e_μ`. The
//! rescaling multiplies `det A` by the exponential of a function linear in
//! `x`, which the second derivative does not see, and keeps every entry of
//! the working matrix `O(1)` no matter how far out `x` is.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_grid::{Field, Grid};

/// Minimum separation between amplitudes.
pub const MIN_BETA_GAP: f64 = 1e-9;

/// Default bound on |Q| at the box edges.
pub const DEFAULT_TAIL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultisolitonParams {
    beta: Vec<f64>,
    c: Vec<f64>,
}

impl MultisolitonParams {
    pub fn new(beta: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if beta.len() != c.len() {
            return Err(Error::InvalidInput(format!(
                "{} amplitudes but {} positions",
                beta.len(),
                c.len()
            )));
        }
        for &b in &beta {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "amplitude {b} is not positive"
                )));
            }
        }
        if let Some(v) = c.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("position {v} is not finite")));
        }
        for i in 0..beta.len() {
            for j in 0..i {
                if (beta[i] - beta[j]).abs() <= MIN_BETA_GAP {
                    return Err(Error::InvalidInput(format!(
                        "amplitudes {} and {} are not distinct",
                        beta[j], beta[i]
                    )));
                }
            }
        }
        Ok(MultisolitonParams { beta, c })
    }

    pub fn empty() -> Self {
        MultisolitonParams {
            beta: vec![],
            c: vec![],
        }
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// Positions after time `t` of KdV flow: `c_n + 4β_n² t`.
    pub fn at_time(&self, t: f64) -> Self {
        MultisolitonParams {
            beta: self.beta.clone(),
            c: self
                .beta
                .iter()
                .zip(&self.c)
                .map(|(b, c)| c + 4.0 * b * b * t)
                .collect(),
        }
    }

    pub fn translated(&self, h: f64) -> Self {
        MultisolitonParams {
            beta: self.beta.clone(),
            c: self.c.iter().map(|c| c + h).collect(),
        }
    }

    pub fn with_c(&self, c: Vec<f64>) -> Result<Self> {
        MultisolitonParams::new(self.beta.clone(), c)
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len() {
            return Err(Error::InvalidInput("permutation has wrong length".into()));
        }
        for &p in perm {
            if p >= self.len() || seen[p] {
                return Err(Error::InvalidInput("not a permutation".into()));
            }
            seen[p] = true;
        }
        Ok(MultisolitonParams {
            beta: perm.iter().map(|&p| self.beta[p]).collect(),
            c: perm.iter().map(|&p| self.c[p]).collect(),
        })
    }
}

/// The matrix `A(x)` itself, unscaled. Only usable where its entries are
/// representable; profile evaluation goes through [`ProfileEvaluator`].
#[derive(Debug, Clone)]
pub struct CauchyMatrix {
    pub x: f64,
    pub a: DMatrix<f64>,
}

impl CauchyMatrix {
    pub fn new(params: &MultisolitonParams, x: f64) -> Self {
        let n = params.len();
        let e: Vec<f64> = (0..n)
            .map(|m| (-params.beta[m] * (x - params.c[m])).exp())
            .collect();
        let a = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            d + e[i] * e[j] / (params.beta[i] + params.beta[j])
        });
        CauchyMatrix { x, a }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a.clone().cholesky().is_some()
    }

    pub fn log_det(&self) -> Option<f64> {
        self.a
            .clone()
            .cholesky()
            .map(|c| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }
}

/// Pointwise evaluator of `Q_{β,c}` and `ln det A` with reusable buffers.
#[derive(Debug, Clone)]
pub struct ProfileEvaluator {
    params: MultisolitonParams,
    cauchy: Vec<f64>,
    b: Vec<f64>,
    b1: Vec<f64>,
    b2: Vec<f64>,
    l: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
}

impl ProfileEvaluator {
    pub fn new(params: &MultisolitonParams) -> Self {
        let n = params.len();
        let cauchy = (0..n * n)
            .map(|k| 1.0 / (params.beta[k / n] + params.beta[k % n]))
            .collect();
        let z = vec![0.0; n * n];
        ProfileEvaluator {
            params: params.clone(),
            cauchy,
            b: z.clone(),
            b1: z.clone(),
            b2: z.clone(),
            l: z.clone(),
            x1: z.clone(),
            x2: z,
        }
    }

    pub fn params(&self) -> &MultisolitonParams {
        &self.params
    }

    /// Fills `B`, `B'`, `B''` of the rescaled matrix and returns the
    /// log of the extracted scale factor `Π_{scaled} e_μ²`.
    fn assemble(&mut self, x: f64) -> f64 {
        let n = self.params.len();
        let mut g = [0.0f64; 3];
        let mut gs = vec![[0.0f64; 3]; n];
        let mut diag = vec![[0.0f64; 3]; n];
        let mut extracted = 0.0;
        for m in 0..n {
            let b = self.params.beta[m];
            let t = -b * (x - self.params.c[m]);
            if t > 0.0 {
                // Row/column divided by e_μ: g = 1, diagonal δ becomes e^{-2t}.
                let d = (-2.0 * t).exp();
                g[0] = 1.0;
                g[1] = 0.0;
                g[2] = 0.0;
                diag[m] = [d, 2.0 * b * d, 4.0 * b * b * d];
                extracted += 2.0 * t;
            } else {
                let e = t.exp();
                g[0] = e;
                g[1] = -b * e;
                g[2] = b * b * e;
                diag[m] = [1.0, 0.0, 0.0];
            }
            gs[m] = g;
        }
        for i in 0..n {
            for j in 0..n {
                let c = self.cauchy[i * n + j];
                let (a, b) = (gs[i], gs[j]);
                let k = i * n + j;
                self.b[k] = c * a[0] * b[0];
                self.b1[k] = c * (a[1] * b[0] + a[0] * b[1]);
                self.b2[k] = c * (a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2]);
            }
            let k = i * n + i;
            self.b[k] += diag[i][0];
            self.b1[k] += diag[i][1];
            self.b2[k] += diag[i][2];
        }
        extracted
    }

    /// In-place Cholesky of `self.b` into `self.l`; returns `ln det B`.
    fn factor(&mut self) -> Result<f64> {
        let n = self.params.len();
        let mut logdet = 0.0;
        for j in 0..n {
            let mut d = self.b[j * n + j];
            for k in 0..j {
                d -= self.l[j * n + k] * self.l[j * n + k];
            }
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::NumericalFailure(format!(
                    "rescaled Cauchy matrix lost positive definiteness (pivot {d:e})"
                )));
            }
            let d = d.sqrt();
            self.l[j * n + j] = d;
            logdet += 2.0 * d.ln();
            for i in j + 1..n {
                let mut s = self.b[i * n + j];
                for k in 0..j {
                    s -= self.l[i * n + k] * self.l[j * n + k];
                }
                self.l[i * n + j] = s / d;
            }
        }
        Ok(logdet)
    }

    /// Solves `B X = R` column by column, overwriting `r` (row-major n×n).
    fn solve_in_place(l: &[f64], r: &mut [f64], n: usize) {
        for col in 0..n {
            for i in 0..n {
                let mut s = r[i * n + col];
                for k in 0..i {
                    s -= l[i * n + k] * r[k * n + col];
                }
                r[i * n + col] = s / l[i * n + i];
            }
            for i in (0..n).rev() {
                let mut s = r[i * n + col];
                for k in i + 1..n {
                    s -= l[k * n + i] * r[k * n + col];
                }
                r[i * n + col] = s / l[i * n + i];
            }
        }
    }

    /// `Q_{β,c}(x)`.
    pub fn value(&mut self, x: f64) -> Result<f64> {
        let n = self.params.len();
        if n == 0 {
            return Ok(0.0);
        }
        self.assemble(x);
        self.factor()?;
        self.x1.copy_from_slice(&self.b1);
        self.x2.copy_from_slice(&self.b2);
        Self::solve_in_place(&self.l, &mut self.x1, n);
        Self::solve_in_place(&self.l, &mut self.x2, n);
        let mut tr2 = 0.0;
        let mut trsq = 0.0;
        for i in 0..n {
            tr2 += self.x2[i * n + i];
            for j in 0..n {
                trsq += self.x1[i * n + j] * self.x1[j * n + i];
            }
        }
        let q = -2.0 * (tr2 - trsq);
        if !q.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "profile not finite at x = {x}"
            )));
        }
        Ok(q)
    }

    /// `ln det A(x)`, computed without forming `A`.
    pub fn log_det(&mut self, x: f64) -> Result<f64> {
        if self.params.is_empty() {
            return Ok(0.0);
        }
        let extracted = self.assemble(x);
        Ok(self.factor()? + extracted)
    }

    /// Samples on the grid without any boundary check.
    pub fn sample(&mut self, grid: &Grid) -> Result<Field> {
        let mut v = Vec::with_capacity(grid.points());
        for j in 0..grid.points() {
            v.push(self.value(grid.node(j))?);
        }
        Field::new(*grid, v)
    }
}

pub fn one_soliton_value(beta: f64, x0: f64, t: f64, x: f64) -> f64 {
    let s = 1.0 / (beta * (x - 4.0 * beta * beta * t - x0)).cosh();
    -2.0 * beta * beta * s * s
}

/// `-2β² sech²(β(x - 4β²t - x₀))` sampled on the grid.
pub fn one_soliton(beta: f64, x0: f64, t: f64, grid: &Grid) -> Result<Field> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "amplitude {beta} is not positive"
        )));
    }
    let half = 0.5 * grid.length();
    let tail = one_soliton_value(beta, x0, t, -half)
        .abs()
        .max(one_soliton_value(beta, x0, t, half).abs());
    if tail >= DEFAULT_TAIL_TOL {
        return Err(Error::DomainTooSmall(format!(
            "soliton tail {tail:e} at the box edge exceeds {DEFAULT_TAIL_TOL:e}"
        )));
    }
    Field::from_fn(*grid, |x| one_soliton_value(beta, x0, t, x))
}

/// The center `x₀` of the single soliton `Q_{β,c}`: `c - ln(2β)/(2β)`.
pub fn one_soliton_center(beta: f64, c: f64) -> f64 {
    c - (2.0 * beta).ln() / (2.0 * beta)
}

/// Largest |Q| at the two box edges `±L/2`.
pub fn edge_amplitude(params: &MultisolitonParams, grid: &Grid) -> Result<f64> {
    let mut ev = ProfileEvaluator::new(params);
    let half = 0.5 * grid.length();
    Ok(ev.value(-half)?.abs().max(ev.value(half)?.abs()))
}

pub fn profile_with_tol(params: &MultisolitonParams, grid: &Grid, tail_tol: f64) -> Result<Field> {
    let tail = edge_amplitude(params, grid)?;
    if tail >= tail_tol {
        return Err(Error::DomainTooSmall(format!(
            "profile amplitude {tail:e} at the box edge exceeds {tail_tol:e}"
        )));
    }
    ProfileEvaluator::new(params).sample(grid)
}

pub fn profile(params: &MultisolitonParams, grid: &Grid) -> Result<Field> {
    profile_with_tol(params, grid, DEFAULT_TAIL_TOL)
}

pub fn profile_at_time(params: &MultisolitonParams, t: f64, grid: &Grid) -> Result<Field> {
    profile(&params.at_time(t), grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    /// `∫ q`
    pub integral: f64,
    /// `P = ∫ ½ q²`
    pub momentum: f64,
    /// `H = ∫ ½ q'² + q³`
    pub energy: f64,
}

impl Invariants {
    pub fn max_rel_diff(&self, other: &Invariants) -> f64 {
        let rel = |a: f64, b: f64| {
            let s = a.abs().max(b.abs());
            if s == 0.0 {
                0.0
            } else {
                (a - b).abs() / s
            }
        };
        rel(self.integral, other.integral)
            .max(rel(self.momentum, other.momentum))
            .max(rel(self.energy, other.energy))
    }
}

pub fn exact_invariants(params: &MultisolitonParams) -> Invariants {
    let b = params.beta();
    Invariants {
        integral: -4.0 * b.iter().sum::<f64>(),
        momentum: 8.0 / 3.0 * b.iter().map(|v| v.powi(3)).sum::<f64>(),
        energy: -32.0 / 5.0 * b.iter().map(|v| v.powi(5)).sum::<f64>(),
    }
}

pub fn functionals(field: &Field) -> Invariants {
    let h = field.grid().spacing();
    let d = field.derivative(1);
    let q = field.samples();
    Invariants {
        integral: field.integral(),
        momentum: 0.5 * field.l2_norm_sq(),
        energy: h * q
            .iter()
            .zip(d.samples())
            .map(|(&v, &dv)| 0.5 * dv * dv + v * v * v)
            .sum::<f64>(),
    }
}
