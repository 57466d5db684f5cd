#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use solitonlab_core::spectral_grid::{Field, Grid};

/// A few modulated Gaussians near the origin; smooth and negligible at the
/// edges of a box of length at least 40.
pub fn random_bumps(rng: &mut ChaCha8Rng, grid: Grid, amp: f64) -> Field {
    let n = rng.gen_range(1..=3);
    let terms: Vec<(f64, f64, f64, f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.gen_range(-amp..amp),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(0.6..1.5),
                rng.gen_range(0.0..3.0),
                rng.gen_range(0.0..6.3),
            )
        })
        .collect();
    Field::from_fn(grid, |x| {
        terms
            .iter()
            .map(|(a, c, w, k, ph)| {
                let u = (x - c) / w;
                a * (-0.5 * u * u).exp() * (k * x + ph).cos()
            })
            .sum()
    })
    .unwrap()
}

pub fn random_betas(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        if b.windows(2).all(|w| w[1] - w[0] > 0.05) {
            return b;
        }
    }
}
