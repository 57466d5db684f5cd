//! Molecular decompositions: a sum of well-separated multisolitons is close to
//! a single multisoliton whose positions carry the accumulated phase shifts.
//!
//! Groups are indexed from 0 and must be ordered left to right. For a group
//! `j` the full Cauchy matrix splits as `B + E` after the rows and columns of
//! every later group are divided by their `e_μ`; `B` carries the group-`j`
//! multisoliton exactly and `E` is exponentially small near `x^j`.

use std::ops::Range;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multisoliton::{MultisolitonParams, ProfileEvaluator, DEFAULT_TAIL_TOL, MIN_BETA_GAP};
use crate::spectral_grid::{Field, Grid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeGroup {
    pub beta: Vec<f64>,
    pub c: Vec<f64>,
    /// Group position `x^j`.
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolecularLayout {
    groups: Vec<MoleculeGroup>,
    ranges: Vec<Range<usize>>,
}

impl MolecularLayout {
    pub fn new(groups: Vec<MoleculeGroup>) -> Result<Self> {
        let mut ranges = Vec::with_capacity(groups.len());
        let mut start = 0;
        for (j, g) in groups.iter().enumerate() {
            // Validates amplitudes and offsets within the group.
            MultisolitonParams::new(g.beta.clone(), g.c.clone())?;
            if !g.x.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "group {j} position is not finite"
                )));
            }
            if j > 0 && g.x <= groups[j - 1].x {
                return Err(Error::InvalidInput(
                    "group positions must be strictly increasing".into(),
                ));
            }
            ranges.push(start..start + g.beta.len());
            start += g.beta.len();
        }
        let all: Vec<f64> = groups.iter().flat_map(|g| g.beta.iter().copied()).collect();
        for i in 0..all.len() {
            for k in 0..i {
                if (all[i] - all[k]).abs() <= MIN_BETA_GAP {
                    return Err(Error::InvalidInput(format!(
                        "amplitude {} repeated across groups",
                        all[i]
                    )));
                }
            }
        }
        Ok(MolecularLayout { groups, ranges })
    }

    /// Groups at `x^j = j·separation` (shifted so the middle sits at 0), each
    /// with zero offsets.
    pub fn evenly_spaced(betas: &[Vec<f64>], separation: f64) -> Result<Self> {
        let mid = 0.5 * (betas.len().saturating_sub(1)) as f64;
        MolecularLayout::new(
            betas
                .iter()
                .enumerate()
                .map(|(j, b)| MoleculeGroup {
                    beta: b.clone(),
                    c: vec![0.0; b.len()],
                    x: (j as f64 - mid) * separation,
                })
                .collect(),
        )
    }

    pub fn groups(&self) -> &[MoleculeGroup] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn len(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global index range of group `j`.
    pub fn range(&self, j: usize) -> Range<usize> {
        self.ranges[j].clone()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.groups
            .iter()
            .flat_map(|g| g.beta.iter().copied())
            .collect()
    }

    pub fn group_of(&self, index: usize) -> usize {
        self.ranges
            .iter()
            .position(|r| r.contains(&index))
            .expect("index inside the layout")
    }

    pub fn translated(&self, h: f64) -> Self {
        let mut out = self.clone();
        for g in &mut out.groups {
            g.x += h;
        }
        out
    }

    /// The group-`j` multisoliton placed at its position: `Q_{β^j,c^j}(· - x^j)`.
    pub fn placed_group(&self, j: usize) -> MultisolitonParams {
        let g = &self.groups[j];
        MultisolitonParams::new(g.beta.clone(), g.c.iter().map(|c| c + g.x).collect())
            .expect("validated at construction")
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.groups.len() {
            return Err(Error::InvalidInput(format!(
                "group {j} out of range (layout has {})",
                self.groups.len()
            )));
        }
        Ok(())
    }
}

/// Positions of the approximating multisoliton, concatenated in group order:
/// `x^j + c^j_μ - (1/β_μ) Σ_{σ in later groups} ln|(β_σ-β_μ)/(β_σ+β_μ)|`.
pub fn composed_positions(layout: &MolecularLayout) -> Vec<f64> {
    let betas = layout.betas();
    let mut out = Vec::with_capacity(betas.len());
    for (j, g) in layout.groups.iter().enumerate() {
        let later = layout.ranges.get(j + 1).map_or(betas.len(), |r| r.start);
        for (k, (&b, &c)) in g.beta.iter().zip(&g.c).enumerate() {
            let shift: f64 = betas[later..]
                .iter()
                .map(|&s| ((s - b) / (s + b)).abs().ln())
                .sum();
            debug_assert!(layout.ranges[j].start + k == out.len());
            out.push(g.x + c - shift / b);
        }
    }
    out
}

pub fn composed_params(layout: &MolecularLayout) -> MultisolitonParams {
    MultisolitonParams::new(layout.betas(), composed_positions(layout))
        .expect("layout amplitudes are distinct")
}

/// Determinant by fraction-exact Gaussian elimination.
pub fn det_rational(mut m: Vec<Vec<BigRational>>) -> BigRational {
    let n = m.len();
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        let pivot = m[col][col].clone();
        det *= &pivot;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] / &pivot;
            for k in col..n {
                let t = &f * &m[col][k];
                m[r][k] -= t;
            }
        }
    }
    det
}

/// Both sides of the inductive Cauchy identity in exact arithmetic:
/// the `(N+1)×(N+1)` determinant with entries `D + a_μa_ν/(β_μ+β_ν)` bordered
/// by `a_μ/(β_μ+β_{N+1})` and `1/(2β_{N+1})`, and `(1/(2β_{N+1}))·det[D + ã_μã_ν/(β_μ+β_ν)]`
/// with `ã_μ = a_μ(β_{N+1}-β_μ)/(β_{N+1}+β_μ)`.
pub fn cauchy_step_exact(
    d: &[Vec<BigRational>],
    a: &[BigRational],
    betas: &[BigRational],
) -> Result<(BigRational, BigRational)> {
    let n = a.len();
    if d.len() != n || d.iter().any(|r| r.len() != n) || betas.len() != n + 1 {
        return Err(Error::InvalidInput(
            "need an N×N matrix, N weights and N+1 amplitudes".into(),
        ));
    }
    if betas.iter().any(|b| !b.is_positive()) {
        return Err(Error::InvalidInput("amplitudes must be positive".into()));
    }
    let top = &betas[n];
    let mut lhs = vec![vec![BigRational::zero(); n + 1]; n + 1];
    for mu in 0..n {
        for nu in 0..n {
            lhs[mu][nu] = &d[mu][nu] + &a[mu] * &a[nu] / (&betas[mu] + &betas[nu]);
        }
        lhs[mu][n] = &a[mu] / (&betas[mu] + top);
        lhs[n][mu] = &a[mu] / (top + &betas[mu]);
    }
    let two_top = top + top;
    lhs[n][n] = BigRational::one() / &two_top;
    let at: Vec<BigRational> = (0..n)
        .map(|mu| &a[mu] * (top - &betas[mu]) / (top + &betas[mu]))
        .collect();
    let rhs_m: Vec<Vec<BigRational>> = (0..n)
        .map(|mu| {
            (0..n)
                .map(|nu| &d[mu][nu] + &at[mu] * &at[nu] / (&betas[mu] + &betas[nu]))
                .collect()
        })
        .collect();
    let rhs = det_rational(rhs_m) / two_top;
    Ok((det_rational(lhs), rhs))
}

/// Floating-point version of [`cauchy_step_exact`].
pub fn cauchy_step(d: &DMatrix<f64>, a: &[f64], betas: &[f64]) -> Result<(f64, f64)> {
    let n = a.len();
    if d.nrows() != n || d.ncols() != n || betas.len() != n + 1 {
        return Err(Error::InvalidInput(
            "need an N×N matrix, N weights and N+1 amplitudes".into(),
        ));
    }
    if betas.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::InvalidInput("amplitudes must be positive".into()));
    }
    let top = betas[n];
    let lhs = DMatrix::from_fn(n + 1, n + 1, |mu, nu| match (mu == n, nu == n) {
        (false, false) => d[(mu, nu)] + a[mu] * a[nu] / (betas[mu] + betas[nu]),
        (false, true) => a[mu] / (betas[mu] + top),
        (true, false) => a[nu] / (top + betas[nu]),
        (true, true) => 0.5 / top,
    });
    let at: Vec<f64> = (0..n)
        .map(|mu| a[mu] * (top - betas[mu]) / (top + betas[mu]))
        .collect();
    let rhs = DMatrix::from_fn(n, n, |mu, nu| {
        d[(mu, nu)] + at[mu] * at[nu] / (betas[mu] + betas[nu])
    });
    Ok((lhs.determinant(), rhs.determinant() * 0.5 / top))
}

pub fn to_rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[derive(Debug, Clone)]
pub struct BlockMatrices {
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Earlier,
    Own,
    Later,
}

/// Matrix with its first two `x`-derivatives, built from exponential terms.
struct Jet {
    v: DMatrix<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
}

impl Jet {
    fn zeros(n: usize) -> Self {
        Jet {
            v: DMatrix::zeros(n, n),
            d1: DMatrix::zeros(n, n),
            d2: DMatrix::zeros(n, n),
        }
    }

    /// Adds `coef · exp(expo)` whose exponent has slope `rate` in `x`.
    fn add(&mut self, i: usize, j: usize, coef: f64, expo: f64, rate: f64) {
        let val = coef * expo.exp();
        self.v[(i, j)] += val;
        self.d1[(i, j)] += rate * val;
        self.d2[(i, j)] += rate * rate * val;
    }
}

/// Builds `B^{(j)}` and `E^{(j)}` at `x` for positions `c`. With `rescale`,
/// group-`j` rows and columns with `e_μ > 1` are divided by `e_μ`.
fn block_jets(layout: &MolecularLayout, c: &[f64], j: usize, x: f64, rescale: bool) -> (Jet, Jet) {
    let beta = layout.betas();
    let n = beta.len();
    let own = layout.range(j);
    let role = |m: usize| {
        if m < own.start {
            Role::Earlier
        } else if m < own.end {
            Role::Own
        } else {
            Role::Later
        }
    };
    let t: Vec<f64> = (0..n).map(|m| -beta[m] * (x - c[m])).collect();
    let r: Vec<f64> = beta.iter().map(|b| -b).collect();
    let (lam, rho): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|m| {
            if rescale && role(m) == Role::Own && t[m] > 0.0 {
                (-t[m], beta[m])
            } else {
                (0.0, 0.0)
            }
        })
        .unzip();
    let mut b = Jet::zeros(n);
    let mut e = Jet::zeros(n);
    for mu in 0..n {
        for nu in 0..n {
            let cc = 1.0 / (beta[mu] + beta[nu]);
            let diag = mu == nu;
            let (sl, sr) = (lam[mu] + lam[nu], rho[mu] + rho[nu]);
            let both = (t[mu] + t[nu] + sl, r[mu] + r[nu] + sr);
            match (role(mu), role(nu)) {
                (Role::Earlier, Role::Earlier) => {
                    if diag {
                        b.add(mu, nu, 1.0, sl, sr);
                    }
                    e.add(mu, nu, cc, both.0, both.1);
                }
                (Role::Earlier, Role::Own) | (Role::Own, Role::Earlier) => {
                    e.add(mu, nu, cc, both.0, both.1);
                }
                (Role::Earlier, Role::Later) => e.add(mu, nu, cc, t[mu] + sl, r[mu] + sr),
                (Role::Later, Role::Earlier) => e.add(mu, nu, cc, t[nu] + sl, r[nu] + sr),
                (Role::Own, Role::Own) => {
                    if diag {
                        b.add(mu, nu, 1.0, sl, sr);
                    }
                    b.add(mu, nu, cc, both.0, both.1);
                }
                (Role::Own, Role::Later) => b.add(mu, nu, cc, t[mu] + sl, r[mu] + sr),
                (Role::Later, Role::Own) => b.add(mu, nu, cc, t[nu] + sl, r[nu] + sr),
                (Role::Later, Role::Later) => {
                    b.add(mu, nu, cc, sl, sr);
                    if diag {
                        e.add(mu, nu, 1.0, -2.0 * t[mu] + sl, -2.0 * r[mu] + sr);
                    }
                }
            }
        }
    }
    (b, e)
}

/// `B^{(j)}(x)` and `E^{(j)}(x)` as tabulated, at the composed positions.
pub fn block_matrices(layout: &MolecularLayout, j: usize, x: f64) -> Result<BlockMatrices> {
    layout.check_index(j)?;
    let c = composed_positions(layout);
    let (b, e) = block_jets(layout, &c, j, x, false);
    Ok(BlockMatrices { b: b.v, e: e.v })
}

/// `ln det A(x) - ln det(B+E)(x)` predicted by the extraction of the later
/// rows and columns: `-2 Σ_{μ later} β_μ(x - c_μ)`.
pub fn extracted_log_factor(layout: &MolecularLayout, j: usize, x: f64) -> Result<f64> {
    layout.check_index(j)?;
    let c = composed_positions(layout);
    let beta = layout.betas();
    let later = layout.range(j).end;
    Ok((later..beta.len())
        .map(|m| -2.0 * beta[m] * (x - c[m]))
        .sum())
}

fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("singular block matrix".into()))
}

/// `-2 ∂ₓ² ln det B^{(j)}` at `x`, from analytic derivatives of the entries.
pub fn group_determinant_reduction(layout: &MolecularLayout, j: usize, x: f64) -> Result<f64> {
    layout.check_index(j)?;
    let c = composed_positions(layout);
    let (b, _) = block_jets(layout, &c, j, x, true);
    let binv = inverse(&b.v)?;
    let u = &binv * &b.d1;
    let v = &binv * &b.d2;
    Ok(-2.0 * (v.trace() - (&u * &u).trace()))
}

/// `det B^{(j)}` two ways: directly, and through the reduced group
/// determinant `det[δ + ã_μã_ν/(β_μ+β_ν)]` over group `j`, which must be
/// multiplied by the determinant of the later groups' Cauchy block.
#[derive(Debug, Clone, Copy)]
pub struct BlockDeterminants {
    pub direct: f64,
    pub reduced: f64,
    /// `det[1/(β_σ+β_τ)]` over later indices
    /// `= Π 1/(2β_σ) · Π_{σ<τ} ((β_σ-β_τ)/(β_σ+β_τ))²`.
    pub later_cauchy: f64,
}

pub fn block_determinants(layout: &MolecularLayout, j: usize, x: f64) -> Result<BlockDeterminants> {
    layout.check_index(j)?;
    let c = composed_positions(layout);
    let beta = layout.betas();
    let own = layout.range(j);
    let (b, _) = block_jets(layout, &c, j, x, false);
    let later: Vec<usize> = (own.end..beta.len()).collect();
    let mut later_cauchy: f64 = later.iter().map(|&s| 0.5 / beta[s]).product();
    for (k, &s) in later.iter().enumerate() {
        for &u in &later[k + 1..] {
            let r = (beta[s] - beta[u]) / (beta[s] + beta[u]);
            later_cauchy *= r * r;
        }
    }
    let at: Vec<f64> = own
        .clone()
        .map(|m| {
            let ratio: f64 = later
                .iter()
                .map(|&s| (beta[s] - beta[m]) / (beta[s] + beta[m]))
                .product();
            (-beta[m] * (x - c[m])).exp() * ratio
        })
        .collect();
    let k = own.len();
    let inner = DMatrix::from_fn(k, k, |a, bb| {
        let d = if a == bb { 1.0 } else { 0.0 };
        d + at[a] * at[bb] / (beta[own.start + a] + beta[own.start + bb])
    });
    Ok(BlockDeterminants {
        direct: b.v.determinant(),
        reduced: later_cauchy * inner.determinant(),
        later_cauchy,
    })
}

/// Index of the group whose territory (split at midpoints between group
/// positions) contains `x`.
fn territory(layout: &MolecularLayout, x: f64) -> usize {
    let g = &layout.groups;
    (0..g.len().saturating_sub(1))
        .take_while(|&k| x >= 0.5 * (g[k].x + g[k + 1].x))
        .count()
}

/// `Q_{β,c_n}(x) - Σ_i Q_{β^i,c^i}(x - x^i)` evaluated without subtracting
/// the two large profiles: the group-`j` term is removed analytically through
/// `ln det(B+E) - ln det B = ln det(I + B⁻¹E)`.
pub fn molecular_residual(
    layout: &MolecularLayout,
    x: f64,
    evals: &mut [ProfileEvaluator],
) -> Result<f64> {
    let j = territory(layout, x);
    let c = composed_positions(layout);
    let (b, e) = block_jets(layout, &c, j, x, true);
    let binv = inverse(&b.v)?;
    let n = b.v.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let xm = &binv * &e.v;
    let rinv = inverse(&(&id + &xm))?;
    let u = &binv * &b.d1;
    let w = &rinv * (&binv * &e.d1 - &xm * &u);
    let t1 = (&rinv * (&binv * &e.d2 - &xm * (&binv * &b.d2))).trace();
    let t2 = 2.0 * (&u * &w).trace() + (&w * &w).trace();
    let mut err = -2.0 * (t1 - t2);
    for (i, ev) in evals.iter_mut().enumerate() {
        if i != j {
            err -= ev.value(x)?;
        }
    }
    Ok(err)
}

fn check_edges(layout: &MolecularLayout, grid: &Grid) -> Result<()> {
    let half = 0.5 * grid.length();
    let mut sets = vec![composed_params(layout)];
    sets.extend((0..layout.group_count()).map(|j| layout.placed_group(j)));
    for p in &sets {
        let mut ev = ProfileEvaluator::new(p);
        let tail = ev.value(-half)?.abs().max(ev.value(half)?.abs());
        if tail >= DEFAULT_TAIL_TOL {
            return Err(Error::DomainTooSmall(format!(
                "profile amplitude {tail:e} at the box edge exceeds {DEFAULT_TAIL_TOL:e}"
            )));
        }
    }
    Ok(())
}

/// Samples of the decomposition residual on the grid.
pub fn molecular_residual_field(layout: &MolecularLayout, grid: &Grid) -> Result<Field> {
    check_edges(layout, grid)?;
    let mut evals: Vec<ProfileEvaluator> = (0..layout.group_count())
        .map(|j| ProfileEvaluator::new(&layout.placed_group(j)))
        .collect();
    let mut v = Vec::with_capacity(grid.points());
    for x in grid.nodes() {
        v.push(molecular_residual(layout, x, &mut evals)?);
    }
    Field::new(*grid, v)
}

/// `‖Q_{β,c_n} - Σ_j Q_{β^j,c^j}(· - x^j)‖_{L²}` on the grid.
pub fn molecular_error(layout: &MolecularLayout, grid: &Grid) -> Result<f64> {
    Ok(molecular_residual_field(layout, grid)?.l2_norm())
}

/// Same quantity by plain subtraction of sampled profiles; loses all digits
/// once the error falls below roundoff of the profiles themselves.
pub fn molecular_error_direct(layout: &MolecularLayout, grid: &Grid) -> Result<f64> {
    check_edges(layout, grid)?;
    let mut diff = ProfileEvaluator::new(&composed_params(layout)).sample(grid)?;
    for j in 0..layout.group_count() {
        diff = diff.sub(&ProfileEvaluator::new(&layout.placed_group(j)).sample(grid)?)?;
    }
    Ok(diff.l2_norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multisoliton::{one_soliton_center, one_soliton_value, CauchyMatrix};

    fn two(delta: f64) -> MolecularLayout {
        MolecularLayout::new(vec![
            MoleculeGroup {
                beta: vec![1.0],
                c: vec![0.0],
                x: 0.0,
            },
            MoleculeGroup {
                beta: vec![2.0],
                c: vec![0.0],
                x: delta,
            },
        ])
        .unwrap()
    }

    #[test]
    fn layout_validation() {
        let g = |b: f64, x: f64| MoleculeGroup {
            beta: vec![b],
            c: vec![0.0],
            x,
        };
        assert!(MolecularLayout::new(vec![g(1.0, 0.0), g(1.0, 5.0)]).is_err());
        assert!(MolecularLayout::new(vec![g(1.0, 5.0), g(2.0, 0.0)]).is_err());
        assert!(MolecularLayout::new(vec![g(1.0, 0.0), g(2.0, 5.0)]).is_ok());
    }

    #[test]
    fn single_group_positions() {
        let l = MolecularLayout::new(vec![MoleculeGroup {
            beta: vec![1.0, 2.0],
            c: vec![0.5, -1.0],
            x: 3.0,
        }])
        .unwrap();
        assert_eq!(composed_positions(&l), vec![3.5, 2.0]);
    }

    #[test]
    fn two_group_positions() {
        let c = composed_positions(&two(7.0));
        assert!((c[0] - 3.0f64.ln()).abs() < 1e-15);
        assert_eq!(c[1], 7.0);
        // Reverse the order: now the β=2 soliton is behind and is shifted.
        let rev = MolecularLayout::new(vec![
            MoleculeGroup {
                beta: vec![2.0],
                c: vec![0.0],
                x: 0.0,
            },
            MoleculeGroup {
                beta: vec![1.0],
                c: vec![0.0],
                x: 7.0,
            },
        ])
        .unwrap();
        let c = composed_positions(&rev);
        assert!((c[0] - 3.0f64.ln() / 2.0).abs() < 1e-15);
        assert_eq!(c[1], 7.0);
    }

    #[test]
    fn cauchy_step_hand_example() {
        let zero = vec![vec![BigRational::zero()]];
        let (l, r) =
            cauchy_step_exact(&zero, &[rational(1, 1)], &[rational(1, 1), rational(2, 1)]).unwrap();
        assert_eq!(l, rational(1, 72));
        assert_eq!(r, rational(1, 72));
    }

    #[test]
    fn cauchy_step_zero_weights() {
        let d = vec![
            vec![rational(2, 1), rational(1, 3)],
            vec![rational(-1, 2), rational(5, 7)],
        ];
        let b = [rational(1, 1), rational(3, 2), rational(5, 2)];
        let (l, r) = cauchy_step_exact(&d, &[rational(0, 1), rational(0, 1)], &b).unwrap();
        let expect = det_rational(d.clone()) / rational(5, 1);
        assert_eq!(l, expect);
        assert_eq!(r, expect);
    }

    #[test]
    fn cauchy_step_float_matches() {
        let d = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 1.1]);
        let (l, r) = cauchy_step(&d, &[0.7, -1.3], &[0.5, 1.5, 2.5]).unwrap();
        assert!((l - r).abs() <= 1e-12 * l.abs());
        assert!(cauchy_step(&d, &[0.7], &[0.5, 1.5]).is_err());
    }

    #[test]
    fn single_group_blocks_are_trivial() {
        let l = MolecularLayout::new(vec![MoleculeGroup {
            beta: vec![1.0, 2.0],
            c: vec![0.5, -1.0],
            x: 0.0,
        }])
        .unwrap();
        let bm = block_matrices(&l, 0, 0.3).unwrap();
        let a = CauchyMatrix::new(&composed_params(&l), 0.3).a;
        assert!((&bm.b - &a).amax() < 1e-15);
        assert_eq!(bm.e.amax(), 0.0);
        assert!(block_matrices(&l, 1, 0.0).is_err());
    }

    #[test]
    fn error_block_vanishes_for_wide_separation() {
        // 30/β_min apart on both sides of the middle group.
        let l = MolecularLayout::new(vec![
            MoleculeGroup {
                beta: vec![1.0],
                c: vec![0.0],
                x: -30.0,
            },
            MoleculeGroup {
                beta: vec![2.0],
                c: vec![0.0],
                x: 0.0,
            },
            MoleculeGroup {
                beta: vec![1.5],
                c: vec![0.0],
                x: 30.0,
            },
        ])
        .unwrap();
        let bm = block_matrices(&l, 1, 0.0).unwrap();
        assert!(bm.e.amax() < 1e-10, "{}", bm.e.amax());
    }

    #[test]
    fn extraction_identity() {
        let l = MolecularLayout::new(vec![
            MoleculeGroup {
                beta: vec![1.0, 0.6],
                c: vec![0.2, -0.3],
                x: -4.0,
            },
            MoleculeGroup {
                beta: vec![2.0],
                c: vec![0.0],
                x: 0.0,
            },
            MoleculeGroup {
                beta: vec![1.5],
                c: vec![0.4],
                x: 5.0,
            },
        ])
        .unwrap();
        let p = composed_params(&l);
        for j in 0..3 {
            for &x in &[-3.0, -1.0, 0.0, 0.7, 2.0] {
                let bm = block_matrices(&l, j, x).unwrap();
                let lhs =
                    (bm.b + bm.e).determinant().ln() + extracted_log_factor(&l, j, x).unwrap();
                let rhs = CauchyMatrix::new(&p, x).log_det().unwrap();
                assert!(
                    (lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0),
                    "j={j} x={x}"
                );
            }
        }
    }

    #[test]
    fn reduced_determinant_matches_direct() {
        let l = MolecularLayout::new(vec![
            MoleculeGroup {
                beta: vec![1.0],
                c: vec![0.0],
                x: -3.0,
            },
            MoleculeGroup {
                beta: vec![2.0, 0.5],
                c: vec![0.0, 0.3],
                x: 0.0,
            },
            MoleculeGroup {
                beta: vec![1.5, 3.0],
                c: vec![0.4, 0.0],
                x: 2.0,
            },
        ])
        .unwrap();
        for &x in &[-2.0, -0.5, 0.0, 1.0] {
            let d = block_determinants(&l, 1, x).unwrap();
            assert!(d.direct > 0.0);
            assert!(
                (d.direct - d.reduced).abs() < 1e-12 * d.direct.abs(),
                "{d:?}"
            );
        }
    }

    #[test]
    fn group_reduction_is_translated_group_profile() {
        let l = two(40.0);
        let c1 = one_soliton_center(1.0, 0.0);
        for k in 0..21 {
            let x = -5.0 + 0.5 * k as f64;
            let got = group_determinant_reduction(&l, 0, x).unwrap();
            let want = one_soliton_value(1.0, c1, 0.0, x);
            assert!((got - want).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn residual_matches_direct_subtraction_at_small_separation() {
        let g = Grid::new(60.0, 1024).unwrap();
        let l = two(4.0).translated(-2.0);
        let a = molecular_error(&l, &g).unwrap();
        let b = molecular_error_direct(&l, &g).unwrap();
        assert!((a - b).abs() < 1e-12 * b.max(1e-300) + 1e-13, "{a} {b}");
    }

    #[test]
    fn single_group_error_is_zero() {
        let g = Grid::new(60.0, 512).unwrap();
        let l = MolecularLayout::new(vec![MoleculeGroup {
            beta: vec![1.0, 2.0],
            c: vec![0.5, -1.0],
            x: 0.0,
        }])
        .unwrap();
        assert!(molecular_error(&l, &g).unwrap() < 1e-12);
    }
}
