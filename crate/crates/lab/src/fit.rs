//! Distance from a field to the multisoliton manifold `{Q_{β,c} : c ∈ ℝ^N}`
//! at fixed `β`, minimized over `c` by Nelder–Mead with peak-seeded restarts.

use serde::{Deserialize, Serialize};
use solitonlab_core::molecular::{composed_positions, MolecularLayout, MoleculeGroup};
use solitonlab_core::multisoliton::{MultisolitonParams, ProfileEvaluator};
use solitonlab_core::spectral_grid::{norm_sq, Field, SobolevSpec};
use solitonlab_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Total Nelder–Mead runs, seeds and polishing restarts together.
    pub restart_budget: usize,
    pub max_iterations: usize,
    /// Stop once every simplex vertex is within this of the best one.
    pub xtol: f64,
    /// Edge of the first simplex around a seed.
    pub initial_step: f64,
    /// Coordinate offset of the local-minimum check.
    pub probe: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restart_budget: 8,
            max_iterations: 4000,
            xtol: 1e-12,
            initial_step: 0.5,
            probe: 1e-4,
        }
    }
}

/// Restarts ending this close to their start count as settled.
const SAME_POINT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldFit {
    /// As given by the caller.
    pub beta: Vec<f64>,
    /// Fitted positions, in the order of `beta`.
    pub c: Vec<f64>,
    pub distance: f64,
    pub spec: SobolevSpec,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    /// The last run met its tolerance and every `±probe` coordinate move
    /// increases the distance.
    pub converged: bool,
}

pub fn manifold_distance(q: &Field, beta: &[f64], spec: &SobolevSpec) -> Result<ManifoldFit> {
    manifold_distance_with(q, beta, spec, &FitOptions::default(), None)
}

/// As [`manifold_distance`]; `hint` (in the order of `beta`) is tried as
/// the first seed, which is how time series reuse the previous fit.
pub fn manifold_distance_with(
    q: &Field,
    beta: &[f64],
    spec: &SobolevSpec,
    opts: &FitOptions,
    hint: Option<&[f64]>,
) -> Result<ManifoldFit> {
    if opts.restart_budget == 0 {
        return Err(Error::InvalidInput(
            "restart budget must be positive".into(),
        ));
    }
    // Validates positivity and distinctness.
    MultisolitonParams::new(beta.to_vec(), vec![0.0; beta.len()])?;
    if let Some(h) = hint {
        if h.len() != beta.len() || h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "hint must hold one finite position per amplitude".into(),
            ));
        }
    }
    if beta.is_empty() {
        return Ok(ManifoldFit {
            beta: vec![],
            c: vec![],
            distance: norm_sq(q, spec).sqrt(),
            spec: *spec,
            iterations: 0,
            evaluations: 1,
            restarts: 0,
            converged: true,
        });
    }

    // Work with increasing β so the answer cannot depend on input order.
    let mut order: Vec<usize> = (0..beta.len()).collect();
    order.sort_by(|&a, &b| beta[a].partial_cmp(&beta[b]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&i| beta[i]).collect();
    let mut obj = Objective::new(q, &sorted, spec);

    let mut seeds = vec![];
    if let Some(h) = hint {
        seeds.push(order.iter().map(|&i| h[i]).collect::<Vec<_>>());
    }
    seeds.extend(peak_seeds(q, &sorted));

    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    let mut iterations = 0;
    let mut runs = 0;
    let mut seed_iter = seeds.into_iter();
    while runs < opts.restart_budget {
        // Polish the incumbent until a restart stops improving it, then
        // move on to the next seed.
        let (start, step) = match &best {
            Some((c, _, false)) => (c.clone(), opts.initial_step * 1e-3),
            _ => match seed_iter.next() {
                Some(s) => (s, opts.initial_step),
                None => break,
            },
        };
        let run = nelder_mead(&mut obj, &start, step, opts)?;
        runs += 1;
        iterations += run.iterations;
        best = Some(match best {
            Some((c, f, done)) if f <= run.f => {
                // No improvement: the incumbent is settled.
                (c, f, done || run.converged)
            }
            Some((c, f, _)) => {
                // A restart that barely moves the value, or ends where it
                // started, found the same minimum. The second test matters
                // when the minimum is zero and every relative gain is large.
                let moved = c
                    .iter()
                    .zip(&run.x)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let settled = run.converged && (f - run.f <= 1e-6 * f || moved <= SAME_POINT);
                (run.x, run.f, settled)
            }
            None => (run.x, run.f, false),
        });
    }
    let (c_sorted, f, settled) = best.expect("at least one run");
    let local_min = is_local_min(&mut obj, &c_sorted, f, opts.probe)?;

    let mut c = vec![0.0; beta.len()];
    for (k, &i) in order.iter().enumerate() {
        c[i] = c_sorted[k];
    }
    Ok(ManifoldFit {
        beta: beta.to_vec(),
        c,
        distance: f.max(0.0).sqrt(),
        spec: *spec,
        iterations,
        evaluations: obj.evaluations,
        restarts: runs.saturating_sub(1),
        converged: settled && local_min,
    })
}

struct Objective<'a> {
    q: &'a Field,
    beta: &'a [f64],
    spec: &'a SobolevSpec,
    evaluations: usize,
}

impl<'a> Objective<'a> {
    fn new(q: &'a Field, beta: &'a [f64], spec: &'a SobolevSpec) -> Self {
        Objective {
            q,
            beta,
            spec,
            evaluations: 0,
        }
    }

    /// `‖q - Q_{β,c}‖²` in the requested norm.
    fn eval(&mut self, c: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let params = MultisolitonParams::new(self.beta.to_vec(), c.to_vec())?;
        let model = ProfileEvaluator::new(&params).sample(self.q.grid())?;
        Ok(norm_sq(&self.q.sub(&model)?, self.spec))
    }
}

fn is_local_min(obj: &mut Objective, c: &[f64], f: f64, probe: f64) -> Result<bool> {
    let mut x = c.to_vec();
    for i in 0..c.len() {
        for s in [-probe, probe] {
            x[i] = c[i] + s;
            if obj.eval(&x)? <= f {
                return Ok(false);
            }
        }
        x[i] = c[i];
    }
    Ok(true)
}

/// Seeds from the wells of `q` deeper than `-β_min²`, matched to the
/// amplitudes by depth (a soliton of amplitude `β` has depth `2β²`).
/// `beta` is increasing.
fn peak_seeds(q: &Field, beta: &[f64]) -> Vec<Vec<f64>> {
    let n = beta.len();
    let g = q.grid();
    let s = q.samples();
    let m = s.len();
    let h = g.spacing();
    let floor = -beta[0] * beta[0];
    let mut wells: Vec<(f64, f64)> = vec![];
    for j in 0..m {
        let (l, r) = (s[(j + m - 1) % m], s[(j + 1) % m]);
        if s[j] < floor && s[j] <= l && s[j] < r {
            // Parabolic refinement of the minimum.
            let den = l - 2.0 * s[j] + r;
            let off = if den > 0.0 { 0.5 * (l - r) / den } else { 0.0 };
            wells.push((s[j], g.node(j) + off * h));
        }
    }
    wells.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    wells.truncate(n);

    let center = |b: f64, x0: f64| x0 + (2.0 * b).ln() / (2.0 * b);
    let mut out = vec![];
    if wells.is_empty() {
        out.push(vec![0.0; n]);
        return out;
    }
    // Deepest well to largest β.
    let matched = wells.len();
    let mut raw = vec![f64::NAN; n];
    for (k, w) in wells.iter().enumerate() {
        let i = n - 1 - k;
        raw[i] = center(beta[i], w.1);
    }
    // Unmatched amplitudes sit in one of the wells (a collision); try each.
    let mut fills: Vec<Vec<f64>> = vec![raw];
    for i in (0..n - matched).rev() {
        let mut next = vec![];
        for f in &fills {
            for w in &wells {
                let mut v = f.clone();
                v[i] = center(beta[i], w.1);
                next.push(v);
            }
        }
        fills = next;
    }
    for f in fills {
        if let Some(c) = phase_corrected(beta, &f) {
            out.push(c);
        }
        out.push(f);
    }
    out
}

/// Converts isolated-soliton positions into the `c` of the multisoliton with
/// solitons there, adding the phase shifts from the solitons to the right.
/// `None` when two positions coincide.
fn phase_corrected(beta: &[f64], isolated: &[f64]) -> Option<Vec<f64>> {
    let mut idx: Vec<usize> = (0..beta.len()).collect();
    idx.sort_by(|&a, &b| isolated[a].partial_cmp(&isolated[b]).unwrap());
    let groups = idx
        .iter()
        .map(|&i| MoleculeGroup {
            beta: vec![beta[i]],
            c: vec![0.0],
            x: isolated[i],
        })
        .collect();
    let layout = MolecularLayout::new(groups).ok()?;
    let composed = composed_positions(&layout);
    let mut c = vec![0.0; beta.len()];
    for (k, &i) in idx.iter().enumerate() {
        c[i] = composed[k];
    }
    Some(c)
}

struct Run {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

fn nelder_mead(obj: &mut Objective, start: &[f64], step: f64, opts: &FitOptions) -> Result<Run> {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), obj.eval(start)?));
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step;
        let f = obj.eval(&v)?;
        simplex.push((v, f));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let spread = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= opts.xtol {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|i| simplex[..n].iter().map(|(v, _)| v[i]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = obj.eval(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = obj.eval(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(0.5);
                let f = obj.eval(&x)?;
                (x, f)
            } else {
                let x = along(-0.5);
                let f = obj.eval(&x)?;
                (x, f)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (a, b) in v.0.iter_mut().zip(&best) {
                        *a = b + 0.5 * (*a - b);
                    }
                    v.1 = obj.eval(&v.0)?;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let (x, f) = simplex.swap_remove(0);
    if !f.is_finite() {
        return Err(Error::NumericalFailure(
            "manifold distance is not finite".into(),
        ));
    }
    Ok(Run {
        x,
        f,
        iterations,
        converged,
    })
}
