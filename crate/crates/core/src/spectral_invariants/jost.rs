//! Reciprocal transmission coefficient `a(k)` from the right Jost solution.
//!
//! With `f(x) = e^{ikx} m(x)`, `m → 1` as `x → +∞` and `m'' + 2ik m' = q m`.
//! To the left of the support `m = a + b e^{-2ikx}`, so
//! `a = m + m'/(2ik)` there.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_grid::{Field, TrigInterpolant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JostOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Samples below this fraction of `max|q|` count as outside the support.
    pub support_tol: f64,
}

impl Default for JostOptions {
    fn default() -> Self {
        JostOptions {
            rtol: 1e-10,
            atol: 1e-13,
            max_steps: 2_000_000,
            support_tol: 1e-16,
        }
    }
}

pub fn a_jost(q: &Field, k: Complex64) -> Result<Complex64> {
    a_jost_with(q, k, &JostOptions::default())
}

type State = [Complex64; 2];

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn rhs(ip: &TrigInterpolant, k: Complex64, x: f64, y: &State) -> State {
    let two_ik = Complex64::new(0.0, 2.0) * k;
    [y[1], ip.eval(x) * y[0] - two_ik * y[1]]
}

pub fn a_jost_with(q: &Field, k: Complex64, opts: &JostOptions) -> Result<Complex64> {
    if !(k.re.is_finite() && k.im.is_finite()) || k.im < 0.0 || k.norm() == 0.0 {
        return Err(Error::InvalidInput(format!(
            "k must be nonzero with Im k >= 0, got {k}"
        )));
    }
    let g = q.grid();
    let s = q.samples();
    let peak = q.sup_norm();
    if peak == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let inside = |v: &f64| v.abs() > opts.support_tol * peak;
    let first = s.iter().position(inside).unwrap_or(0);
    let last = s.iter().rposition(inside).unwrap_or(s.len() - 1);
    let h_grid = g.spacing();
    let half = 0.5 * g.length();
    let x_right = (g.node(last) + h_grid).min(half);
    let x_left = (g.node(first) - h_grid).max(-half);
    let ip = q.interpolant(1e-18);

    let mut x = x_right;
    let mut y: State = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let mut h = -(0.05f64).min(0.5 / k.norm());
    let mut ks = [[Complex64::new(0.0, 0.0); 2]; 7];
    let mut steps = 0;
    ks[0] = rhs(&ip, k, x, &y);
    while x > x_left {
        if steps >= opts.max_steps {
            return Err(Error::Solver {
                x,
                reason: "step budget exhausted".into(),
                steps,
                last_step: h,
            });
        }
        if x + h < x_left {
            h = x_left - x;
        }
        for st in 1..7 {
            let mut yt = y;
            for (j, kj) in ks.iter().enumerate().take(st) {
                let a = A[st][j];
                if a != 0.0 {
                    yt[0] += h * a * kj[0];
                    yt[1] += h * a * kj[1];
                }
            }
            ks[st] = rhs(&ip, k, x + C[st] * h, &yt);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for c in 0..2 {
            let mut d5 = Complex64::new(0.0, 0.0);
            let mut d4 = Complex64::new(0.0, 0.0);
            for st in 0..7 {
                d5 += B5[st] * ks[st][c];
                d4 += B4[st] * ks[st][c];
            }
            y5[c] += h * d5;
            let scale = opts.atol + opts.rtol * y[c].norm().max(y5[c].norm());
            err = err.max((h * (d5 - d4)).norm() / scale);
        }
        steps += 1;
        if !err.is_finite() {
            return Err(Error::Solver {
                x,
                reason: "non-finite error estimate".into(),
                steps,
                last_step: h,
            });
        }
        if err <= 1.0 {
            x += h;
            y = y5;
            // First-same-as-last: stage 7 is the derivative at the new point.
            ks[0] = ks[6];
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h.abs() < 1e-14 * (1.0 + x.abs()) {
            return Err(Error::Solver {
                x,
                reason: "step size underflow".into(),
                steps,
                last_step: h,
            });
        }
    }
    let two_ik = Complex64::new(0.0, 2.0) * k;
    Ok(y[0] + y[1] / two_ik)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multisoliton::{profile, MultisolitonParams};
    use crate::spectral_grid::Grid;
    use crate::spectral_invariants::alpha::blaschke;

    #[test]
    fn free_case() {
        let q = Field::zeros(Grid::new(20.0, 64).unwrap());
        assert_eq!(
            a_jost(&q, Complex64::new(1.0, 0.5)).unwrap(),
            Complex64::new(1.0, 0.0)
        );
        assert!(a_jost(&q, Complex64::new(0.0, 0.0)).is_err());
        assert!(a_jost(&q, Complex64::new(1.0, -0.5)).is_err());
    }

    #[test]
    fn two_soliton_at_3i() {
        let g = Grid::new(40.0, 512).unwrap();
        let q = profile(
            &MultisolitonParams::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap(),
            &g,
        )
        .unwrap();
        let a = a_jost(&q, Complex64::new(0.0, 3.0)).unwrap();
        assert!((a - 0.1).norm() < 1e-8, "{a}");
        let k = Complex64::new(0.7, 0.0);
        let a = a_jost(&q, k).unwrap();
        assert!((a - blaschke(&[1.0, 2.0], k)).norm() < 1e-7, "{a}");
    }
}
