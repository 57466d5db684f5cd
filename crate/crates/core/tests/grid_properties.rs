mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use solitonlab_core::spectral_grid::{
    bernstein_constant, inverse_transform, lp_project, norm, norm_sq, Field, Grid, LpMode,
    SobolevSpec,
};

fn field(seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_bumps(&mut rng, Grid::new(40.0, 256).unwrap(), 1.0)
}

fn max_diff(a: &Field, b: &[f64]) -> f64 {
    a.samples()
        .iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn plancherel_and_round_trip(seed in any::<u64>()) {
        let f = field(seed);
        let l2 = f.l2_norm_sq();
        let spec = norm_sq(&f, &SobolevSpec::l2());
        prop_assert!((l2 - spec).abs() <= 1e-12 * l2);
        let back = inverse_transform(f.grid(), f.spectrum());
        prop_assert!(max_diff(&f, &back) <= 1e-12 * f.sup_norm());
    }

    #[test]
    fn sobolev_norms_increase_with_s(seed in any::<u64>()) {
        let f = field(seed);
        let mut last = 0.0;
        for s in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let v = norm(&f, &SobolevSpec::new(s, None).unwrap());
            prop_assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn projections_resum(seed in any::<u64>()) {
        let f = field(seed);
        let g = *f.grid();
        let ns = g.dyadic_numbers();
        for &n in &ns {
            let lo = lp_project(&f, n, LpMode::Below).unwrap();
            let hi = lp_project(&f, n, LpMode::Above).unwrap();
            let sum = lo.add(&hi).unwrap();
            prop_assert!(max_diff(&sum, f.samples()) <= 1e-13 * f.sup_norm().max(1.0));
        }
        let mut acc = lp_project(&f, ns[0], LpMode::Below).unwrap();
        for &n in &ns[1..] {
            acc = acc.add(&lp_project(&f, n, LpMode::At).unwrap()).unwrap();
        }
        let target = f.without_nyquist();
        prop_assert!(max_diff(&acc, target.samples()) <= 1e-13 * f.sup_norm().max(1.0));
    }

    #[test]
    fn bernstein_inequality(seed in any::<u64>()) {
        let f = field(seed);
        for &n in &f.grid().dyadic_numbers() {
            for mode in [LpMode::At, LpMode::Below] {
                let p = lp_project(&f, n, mode).unwrap();
                let bound = bernstein_constant(f.grid(), n) * p.l2_norm();
                prop_assert!(p.sup_norm() <= bound * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
}

#[test]
fn out_of_band_projection_is_an_error() {
    let f = field(1);
    let (lo, hi) = f.grid().dyadic_range();
    assert!(lp_project(&f, 2.0 * hi, LpMode::At).is_err());
    assert!(lp_project(&f, 0.5 * lo, LpMode::Below).is_err());
    assert!(lp_project(&f, 3.0, LpMode::Below).is_err());
}

#[test]
fn translation_preserves_norms() {
    let f = field(7);
    let t = f.translate(1.37);
    for s in [-1.0, 0.0, 1.0] {
        let spec = SobolevSpec::new(s, None).unwrap();
        let (a, b) = (norm(&f, &spec), norm(&t, &spec));
        assert!((a - b).abs() < 1e-12 * a);
    }
}
