//! Exact lattice sums `Σ_{n∈ℤ} Π_i 1/((n-p_i)² - z²)` with integer shifts
//! `p_i` and `Im z > 0`, by residues of `π cot(πw)`.
//!
//! Every pole sits at `p_i ± z`, so `cot(πw) = ±cot(πz)` at each of them and a
//! single cotangent evaluation serves the whole sum.

use std::f64::consts::PI;

use num_complex::Complex64;

fn cot_upper(z: Complex64) -> Complex64 {
    // cot(w) = i(e^{2iw} + 1)/(e^{2iw} - 1); |e^{2iw}| < 1 when Im w > 0.
    let i = Complex64::new(0.0, 1.0);
    let e = (2.0 * i * z).exp();
    i * (e + 1.0) / (e - 1.0)
}

/// `Σ_n Π_i 1/((n - p_i)² - z²)`; shifts may repeat up to three times.
pub fn lattice_sum(shifts: &[i64], z: Complex64) -> Complex64 {
    Lattice::new(z).sum(shifts)
}

/// Lattice sums at a fixed `z`, sharing one cotangent evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    z: Complex64,
    cot: Complex64,
}

impl Lattice {
    pub fn new(z: Complex64) -> Self {
        debug_assert!(z.im > 0.0);
        Lattice {
            z,
            cot: cot_upper(PI * z),
        }
    }

    pub fn sum(&self, shifts: &[i64]) -> Complex64 {
        let (z, c) = (self.z, self.cot);
        // Derivatives of g(w) = π cot(πw) at a pole p ± z, given cot = ±c.
        let g = |s: f64| {
            let ct = c * s;
            let g0 = PI * ct;
            let g1 = -PI * PI * (1.0 + ct * ct);
            let g2 = 2.0 * PI.powi(3) * ct * (1.0 + ct * ct);
            (g0, g1, g2)
        };
        let mut distinct: Vec<(i64, usize)> = vec![];
        for &p in shifts {
            match distinct.iter_mut().find(|(q, _)| *q == p) {
                Some(e) => e.1 += 1,
                None => distinct.push((p, 1)),
            }
        }
        // Poles as (location, multiplicity, sign of cot relative to cot(πz)).
        let mut poles: Vec<(Complex64, usize, f64)> = vec![];
        for &(p, mult) in &distinct {
            poles.push((Complex64::new(p as f64, 0.0) + z, mult, 1.0));
            poles.push((Complex64::new(p as f64, 0.0) - z, mult, -1.0));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (k, &(u, mult, s)) in poles.iter().enumerate() {
            // h(w) = (w-u)^mult f(w) = Π_{other poles v} (w-v)^{-m_v}
            let mut h = Complex64::new(1.0, 0.0);
            let mut s1 = Complex64::new(0.0, 0.0);
            let mut s2 = Complex64::new(0.0, 0.0);
            for (j, &(v, mv, _)) in poles.iter().enumerate() {
                if j == k {
                    continue;
                }
                let d = u - v;
                h /= d.powu(mv as u32);
                s1 -= mv as f64 / d;
                s2 += mv as f64 / (d * d);
            }
            let (g0, g1, g2) = g(s);
            let h1 = h * s1;
            let h2 = h * (s1 * s1 + s2);
            let res = match mult {
                1 => g0 * h,
                2 => g1 * h + g0 * h1,
                3 => 0.5 * (g2 * h + 2.0 * g1 * h1 + g0 * h2),
                _ => unreachable!("at most three coincident shifts"),
            };
            total -= res;
        }
        total
    }
}
