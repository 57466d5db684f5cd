//! Fourier-basis truncation of `√R₀(k) q √R₀(k)`, `R₀(k) = (-∂² - k²)^{-1}`,
//! on the periodic box, together with the exact traces of the untruncated
//! operator.
//!
//! In the basis `e^{iξ_m x}/√L` multiplication by `q` has entries
//! `(√(2π)/L) q̂(ξ_a - ξ_b)`, so
//! `K_{ab} = (√(2π)/L) q̂(ξ_a - ξ_b) / (√(ξ_a² - k²) √(ξ_b² - k²))`
//! for frequencies `|m| ≤ P`. Differences outside the grid band (and the
//! Nyquist difference) carry `q̂ = 0`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::lattice::Lattice;
use crate::error::{Error, Result};
use crate::spectral_grid::{Field, Grid};

/// Modes with `|q̂| ≤ BAND_CUTOFF · max|q̂|` are dropped from the exact
/// operator traces.
pub const BAND_CUTOFF: f64 = 1e-17;

pub(crate) fn check_k(k: Complex64) -> Result<()> {
    if !(k.re.is_finite() && k.im.is_finite()) || k.im <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "spectral parameter must lie in the open upper half-plane, got {k}"
        )));
    }
    Ok(())
}

/// `q̂` at a signed wavenumber difference, zero outside the resolved band.
pub(crate) fn qhat_at(q: &Field, d: i64) -> Complex64 {
    let g = q.grid();
    let half = (g.points() / 2) as i64;
    if d.abs() >= half {
        Complex64::new(0.0, 0.0)
    } else {
        q.spectrum()[g.slot(d).expect("inside band")]
    }
}

#[derive(Debug, Clone)]
pub struct KMatrix {
    k: Complex64,
    grid: Grid,
    half_width: usize,
    entries: DMatrix<Complex64>,
}

/// `K` at `k = iκ` on the full resolved band `|m| ≤ M/2`.
pub fn build_k_matrix(q: &Field, kappa: f64) -> Result<KMatrix> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidInput(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    KMatrix::with_window(q, Complex64::new(0.0, kappa), q.grid().points() / 2)
}

impl KMatrix {
    pub fn with_window(q: &Field, k: Complex64, half_width: usize) -> Result<Self> {
        check_k(k)?;
        let g = *q.grid();
        let p = half_width as i64;
        let n = 2 * half_width + 1;
        let dxi = g.dxi();
        let c = (2.0 * PI).sqrt() / g.length();
        let s: Vec<Complex64> = (-p..=p)
            .map(|m| {
                let xi = m as f64 * dxi;
                (Complex64::new(xi * xi, 0.0) - k * k).sqrt().inv()
            })
            .collect();
        let hermitian = k.re == 0.0;
        let mut entries = DMatrix::<Complex64>::zeros(n, n);
        for b in 0..n {
            let start = if hermitian { b } else { 0 };
            for a in start..n {
                let d = a as i64 - b as i64;
                let v = c * qhat_at(q, d) * s[a] * s[b];
                entries[(a, b)] = v;
                if hermitian {
                    entries[(b, a)] = v.conj();
                }
            }
        }
        if hermitian {
            for a in 0..n {
                entries[(a, a)].im = 0.0;
            }
        }
        Ok(KMatrix {
            k,
            grid: g,
            half_width,
            entries,
        })
    }

    pub fn k(&self) -> Complex64 {
        self.k
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Largest retained |ξ|.
    pub fn cutoff(&self) -> f64 {
        self.half_width as f64 * self.grid.dxi()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        let n = self.dim();
        (0..n).all(|a| (0..n).all(|b| self.entries[(a, b)] == self.entries[(b, a)].conj()))
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// `tr K²` of the truncated matrix.
    pub fn window_trace_sq(&self) -> Complex64 {
        let n = self.dim();
        let mut s = Complex64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                s += self.entries[(a, b)] * self.entries[(b, a)];
            }
        }
        s
    }

    /// Hilbert–Schmidt norm of the truncated matrix.
    pub fn window_hs_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `U^H K U` in the real basis `{1, √2 cos(ξ_m x), √2 sin(ξ_m x)}`; real
    /// symmetric when `q` is real and `k = iκ`.
    pub fn to_real_symmetric(&self) -> Result<DMatrix<f64>> {
        if self.k.re != 0.0 {
            return Err(Error::InvalidInput(
                "real form exists only on the imaginary axis".into(),
            ));
        }
        let p = self.half_width;
        let n = self.dim();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let i = Complex64::new(0.0, 1.0);
        // Basis vector j as up to two (slot, coefficient) pairs; slot = m + P.
        let basis: Vec<[(usize, Complex64); 2]> = (0..n)
            .map(|j| {
                if j == 0 {
                    [(p, Complex64::new(1.0, 0.0)), (p, Complex64::new(0.0, 0.0))]
                } else {
                    let m = j.div_ceil(2);
                    if j % 2 == 1 {
                        [
                            (p + m, Complex64::new(r, 0.0)),
                            (p - m, Complex64::new(r, 0.0)),
                        ]
                    } else {
                        [(p + m, -i * r), (p - m, i * r)]
                    }
                }
            })
            .collect();
        let mut out = DMatrix::<f64>::zeros(n, n);
        for v in 0..n {
            for u in v..n {
                let mut s = Complex64::new(0.0, 0.0);
                for &(a, ca) in &basis[u] {
                    if ca.norm_sqr() == 0.0 {
                        continue;
                    }
                    for &(b, cb) in &basis[v] {
                        if cb.norm_sqr() == 0.0 {
                            continue;
                        }
                        s += ca.conj() * self.entries[(a, b)] * cb;
                    }
                }
                out[(u, v)] = s.re;
                out[(v, u)] = s.re;
            }
        }
        Ok(out)
    }
}

/// Significant Fourier modes of `q` as `(wavenumber, q̂)`, Nyquist excluded.
pub(crate) fn spectral_band(q: &Field) -> Vec<(i64, Complex64)> {
    let g = q.grid();
    let spec = q.spectrum();
    let peak = spec.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let nyq = g.nyquist_index();
    (0..g.points())
        .filter(|&m| m != nyq && spec[m].norm() > BAND_CUTOFF * peak)
        .map(|m| (g.signed_index(m), spec[m]))
        .collect()
}

/// `tr K²` of the full (untruncated) operator on the lattice:
/// `(2π/L²) Σ_p q̂_p q̂_{-p} Σ_n w(ξ_n) w(ξ_n - ξ_p)`, `w(ξ) = 1/(ξ² - k²)`.
pub fn operator_trace_sq(q: &Field, k: Complex64) -> Result<Complex64> {
    check_k(k)?;
    let g = q.grid();
    let dxi = g.dxi();
    let lat = Lattice::new(k / dxi);
    let c2 = 2.0 * PI / (g.length() * g.length());
    let scale = c2 / dxi.powi(4);
    Ok(spectral_band(q)
        .into_iter()
        .map(|(p, z)| z * qhat_at(q, -p) * lat.sum(&[0, p]))
        .sum::<Complex64>()
        * scale)
}

/// `tr K³` of the full operator:
/// `c³ Σ_{p₁,p₂} q̂_{p₁} q̂_{p₂} q̂_{-p₁-p₂} Σ_n w(ξ_n) w(ξ_n - ξ_{p₁}) w(ξ_n - ξ_{p₁+p₂})`.
pub fn operator_trace_cube(q: &Field, k: Complex64) -> Result<Complex64> {
    check_k(k)?;
    let g = q.grid();
    let dxi = g.dxi();
    let lat = Lattice::new(k / dxi);
    let c = (2.0 * PI).sqrt() / g.length();
    let scale = c * c * c / dxi.powi(6);
    let band = spectral_band(q);
    let mut total = Complex64::new(0.0, 0.0);
    for &(p1, a) in &band {
        for &(p2, b) in &band {
            let z = qhat_at(q, -p1 - p2);
            if z.norm_sqr() == 0.0 {
                continue;
            }
            total += a * b * z * lat.sum(&[0, p1, p1 + p2]);
        }
    }
    Ok(total * scale)
}

/// `‖K‖_{I₂}` of the full operator at `k = iκ`.
pub fn operator_hs_norm(q: &Field, kappa: f64) -> Result<f64> {
    Ok(operator_trace_sq(q, Complex64::new(0.0, kappa))?
        .re
        .max(0.0)
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_grid::{norm_sq, SobolevSpec};

    fn bump(grid: Grid) -> Field {
        Field::from_fn(grid, |x| {
            -1.5 * (-(x - 0.3) * (x - 0.3)).exp() + 0.4 * (-(x + 1.0).powi(2) * 2.0).exp()
        })
        .unwrap()
    }

    #[test]
    fn zero_potential_gives_zero_matrix() {
        let g = Grid::new(20.0, 64).unwrap();
        let k = build_k_matrix(&Field::zeros(g), 2.0).unwrap();
        assert_eq!(k.window_hs_norm(), 0.0);
        assert_eq!(k.dim(), 65);
    }

    #[test]
    fn hermitian_on_imaginary_axis() {
        let g = Grid::new(20.0, 64).unwrap();
        let k = build_k_matrix(&bump(g), 3.0).unwrap();
        assert!(k.is_hermitian());
    }

    #[test]
    fn rejects_lower_half_plane() {
        let g = Grid::new(20.0, 64).unwrap();
        assert!(KMatrix::with_window(&bump(g), Complex64::new(1.0, -0.1), 8).is_err());
        assert!(build_k_matrix(&bump(g), 0.0).is_err());
    }

    #[test]
    fn operator_trace_matches_h_minus_one_kappa() {
        // Agreement is exact up to periodic images, O(e^{-κL}).
        let g = Grid::new(40.0, 256).unwrap();
        let q = bump(g);
        for kappa in [1.0, 2.0, 10.0] {
            let t2 = operator_trace_sq(&q, Complex64::new(0.0, kappa)).unwrap();
            let n = norm_sq(&q, &SobolevSpec::h_minus_one_kappa(kappa).unwrap()) / kappa;
            assert!((t2.re - n).abs() < 1e-12 * n, "{} {}", t2.re, n);
            assert!(t2.im.abs() < 1e-12 * n);
        }
    }

    #[test]
    fn window_traces_converge_to_operator_traces() {
        let g = Grid::new(20.0, 64).unwrap();
        let q = bump(g);
        let k = Complex64::new(0.4, 1.5);
        let t2 = operator_trace_sq(&q, k).unwrap();
        let t3 = operator_trace_cube(&q, k).unwrap();
        let mut prev = f64::INFINITY;
        for p in [32, 128, 512] {
            let km = KMatrix::with_window(&q, k, p).unwrap();
            let e = &km.entries;
            let w3 = (e * e * e).trace();
            let err2 = (km.window_trace_sq() - t2).norm();
            let err3 = (w3 - t3).norm();
            assert!(err2 < prev);
            prev = err2;
            if p == 512 {
                assert!(err2 < 1e-6 * t2.norm(), "{err2}");
                assert!(err3 < 1e-6 * t3.norm(), "{err3}");
            }
        }
    }

    #[test]
    fn real_form_preserves_spectrum_traces() {
        let g = Grid::new(20.0, 64).unwrap();
        let km = KMatrix::with_window(&bump(g), Complex64::new(0.0, 1.0), 16).unwrap();
        let r = km.to_real_symmetric().unwrap();
        let e = km.entries();
        assert!(((e * e).trace().re - (&r * &r).trace()).abs() < 1e-13);
        assert!(((e * e * e).trace().re - (&r * &r * &r).trace()).abs() < 1e-13);
        assert!((&r - r.transpose()).amax() == 0.0);
    }
}
