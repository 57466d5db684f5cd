//! Bound states `-β²` of `-∂² + q` from the Fourier discretization on the box.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::jost::a_jost;
use crate::error::{Error, Result};
use crate::spectral_grid::{FftPair, Field, Grid};

/// States with `βL` below this are located from the zeros of `a(iy)` rather
/// than trusted to the box.
pub const WEAK_BINDING: f64 = 40.0;

/// Smallest `β` the search for a weakly bound state looks at.
pub const WEAK_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundStateOptions {
    /// Eigenvalues with `|λ|` below this are near-threshold and not returned.
    pub threshold: f64,
    /// Confirm each `β` above `jost_min_beta` by a sign change of `a(iy)`,
    /// and relocate every weakly bound one to the zero of `a(iy)`.
    pub jost_check: bool,
    pub jost_min_beta: f64,
    /// Re-run on the doubled box and report the largest shift in `β`.
    pub box_check: bool,
}

impl Default for BoundStateOptions {
    fn default() -> Self {
        BoundStateOptions {
            threshold: 1e-8,
            jost_check: true,
            jost_min_beta: 1e-2,
            box_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundStateReport {
    /// Increasing.
    pub betas: Vec<f64>,
    /// Eigenvalues in `(-threshold, 0)`, excluded from `betas`.
    pub near_threshold: Vec<f64>,
    /// Weakly bound box states with no matching zero of `a(iy)`.
    pub dropped: Vec<f64>,
    /// One entry per `β`; `None` when unchecked.
    pub jost_confirmed: Vec<Option<bool>>,
    pub box_shift: Option<f64>,
}

/// `β`'s of the bound states, increasing. Fails if a Jost cross-check
/// disagrees with the eigenvalue.
pub fn bound_states(q: &Field) -> Result<Vec<f64>> {
    let r = bound_states_report(q, &BoundStateOptions::default())?;
    if let Some(i) = r.jost_confirmed.iter().position(|c| *c == Some(false)) {
        return Err(Error::NumericalFailure(format!(
            "bound state β = {} has no matching zero of a(iβ)",
            r.betas[i]
        )));
    }
    Ok(r.betas)
}

fn negative_eigenvalues(q: &Field) -> Vec<f64> {
    let g = q.grid();
    let m = g.points();
    // First column of the circulant second-derivative matrix.
    let mut buf: Vec<Complex64> = (0..m)
        .map(|j| {
            let xi = g.frequency(j);
            Complex64::new(-xi * xi, 0.0)
        })
        .collect();
    FftPair::new(m).inverse(&mut buf);
    let d2: Vec<f64> = buf.iter().map(|c| c.re / m as f64).collect();
    let s = q.samples();
    let h = DMatrix::from_fn(m, m, |i, j| {
        let r = (i + m - j) % m;
        -d2[r] + if i == j { s[i] } else { 0.0 }
    });
    let eig = SymmetricEigen::new(h);
    let mut out = vec![];
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < 0.0 {
            let v = eig.eigenvectors.column(idx).into_owned();
            out.push(rayleigh(q, &v).min(0.0));
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

// Rayleigh quotient with the derivative applied spectrally.
fn rayleigh(q: &Field, v: &DVector<f64>) -> f64 {
    let g = q.grid();
    let m = g.points();
    let mut buf: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let fft = FftPair::new(m);
    fft.forward(&mut buf);
    let mut kin = 0.0;
    for (j, c) in buf.iter().enumerate() {
        let xi = g.frequency(j);
        kin += xi * xi * c.norm_sqr();
    }
    kin /= m as f64;
    let pot: f64 = v.iter().zip(q.samples()).map(|(a, b)| a * a * b).sum();
    (kin + pot) / v.norm_squared()
}

fn zero_padded(q: &Field) -> Result<Field> {
    let g = q.grid();
    let m = g.points();
    let big = Grid::new(2.0 * g.length(), 2 * m)?;
    let mut s = vec![0.0; 2 * m];
    s[m / 2..m / 2 + m].copy_from_slice(q.samples());
    Field::new(big, s)
}

pub fn bound_states_report(q: &Field, opts: &BoundStateOptions) -> Result<BoundStateReport> {
    let lams = negative_eigenvalues(q);
    let mut betas: Vec<f64> = vec![];
    let mut near = vec![];
    for lam in lams {
        if lam > -opts.threshold {
            log::warn!("near-threshold eigenvalue {lam:e} excluded from the bound states");
            near.push(lam);
        } else {
            betas.push((-lam).sqrt());
        }
    }
    betas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let length = q.grid().length();
    let box_betas = betas.clone();
    let mut confirmed = vec![None; betas.len()];
    let mut dropped = vec![];
    if opts.jost_check {
        let f = |y: f64| -> Result<f64> { Ok(a_jost(q, Complex64::new(0.0, y))?.re) };
        let mut kept = vec![];
        for (i, &b) in box_betas.iter().enumerate() {
            // A state whose decay length is comparable to the box feels the
            // periodic images; its box eigenvalue is only a first guess.
            let weak = b * length < WEAK_BINDING;
            if b < opts.jost_min_beta && !weak {
                kept.push((b, None));
                continue;
            }
            // Stay inside the gaps to the neighbouring β's.
            let lo_lim = if i > 0 {
                0.5 * (b + box_betas[i - 1])
            } else {
                0.0
            };
            let hi_lim = box_betas
                .get(i + 1)
                .map_or(f64::INFINITY, |n| 0.5 * (b + n));
            // Weak binding on the line is far weaker than on the box (β ≈ -½∫q
            // against √(-∫q/L)), so the search reaches down to WEAK_FLOOR.
            let max_ratio: f64 = if weak {
                (b / WEAK_FLOOR).max(8.0)
            } else {
                1.001
            };
            let mut ratio: f64 = 1.001;
            let mut bracket = None;
            loop {
                let lo = (b / ratio).max(lo_lim);
                let hi = (b * ratio).min(hi_lim);
                let flo = f(lo)?;
                if flo * f(hi)? < 0.0 {
                    bracket = Some((lo, hi, flo));
                    break;
                }
                if ratio >= max_ratio {
                    break;
                }
                ratio = (ratio * ratio).min(max_ratio);
            }
            match (bracket, weak) {
                (Some((mut lo, mut hi, mut flo)), true) => {
                    while hi - lo > 1e-13 * hi {
                        let mid = 0.5 * (lo + hi);
                        let fm = f(mid)?;
                        if fm * flo < 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                            flo = fm;
                        }
                    }
                    kept.push((0.5 * (lo + hi), Some(true)));
                }
                (Some(_), false) => kept.push((b, Some(true))),
                (None, true) => {
                    log::warn!("weakly bound box state β = {b:e} has no zero of a(iy); dropped");
                    dropped.push(b);
                }
                (None, false) => kept.push((b, Some(false))),
            }
        }
        betas = kept.iter().map(|k| k.0).collect();
        confirmed = kept.iter().map(|k| k.1).collect();
    }

    let box_shift = if opts.box_check {
        let big = negative_eigenvalues(&zero_padded(q)?);
        let big: Vec<f64> = big
            .into_iter()
            .filter(|l| *l <= -opts.threshold)
            .map(|l| (-l).sqrt())
            .rev()
            .collect();
        if big.len() != betas.len() {
            Some(f64::INFINITY)
        } else {
            Some(
                big.iter()
                    .zip(&betas)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
            )
        }
    } else {
        None
    };

    Ok(BoundStateReport {
        betas,
        near_threshold: near,
        dropped,
        jost_confirmed: confirmed,
        box_shift,
    })
}
