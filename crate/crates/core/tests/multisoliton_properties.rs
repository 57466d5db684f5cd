mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solitonlab_core::multisoliton::{
    exact_invariants, functionals, one_soliton_center, one_soliton_value, profile, profile_at_time,
    MultisolitonParams, ProfileEvaluator,
};
use solitonlab_core::spectral_grid::Grid;

#[test]
fn one_soliton_reduction_on_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let beta = rng.gen_range(0.3..3.0);
        let c = rng.gen_range(-5.0..5.0);
        let mut ev = ProfileEvaluator::new(&MultisolitonParams::new(vec![beta], vec![c]).unwrap());
        let mut err: f64 = 0.0;
        for k in 0..=400 {
            let x = -20.0 + 0.1 * k as f64;
            let closed =
                -2.0 * beta * beta / (beta * (x - c) + 0.5 * (2.0 * beta).ln()).cosh().powi(2);
            err = err.max((ev.value(x).unwrap() - closed).abs());
            let alt = one_soliton_value(beta, one_soliton_center(beta, c), 0.0, x);
            err = err.max((alt - closed).abs());
        }
        assert!(err < 1e-12, "β = {beta}, c = {c}: {err:e}");
    }
}

#[test]
fn invariants_match_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = Grid::new(80.0, 2048).unwrap();
    for n in 1..=4 {
        for _ in 0..3 {
            let beta = common::random_betas(&mut rng, n, 0.5, 2.0);
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-6.0..6.0)).collect();
            let p = MultisolitonParams::new(beta, c).unwrap();
            let q = profile(&p, &g).unwrap();
            let d = functionals(&q).max_rel_diff(&exact_invariants(&p));
            assert!(d < 1e-8, "{p:?}: {d:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn translation_shifts_every_position(
        b1 in 0.5f64..1.0, gap in 0.2f64..0.5, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0,
        h in -4.0f64..4.0,
    ) {
        let g = Grid::new(100.0, 1024).unwrap();
        let p = MultisolitonParams::new(vec![b1, b1 + gap], vec![c1, c2]).unwrap();
        let shifted = profile(&p.translated(h), &g).unwrap();
        let moved = profile(&p, &g).unwrap().translate(h);
        let err = shifted.sub(&moved).unwrap().sup_norm();
        prop_assert!(err < 1e-9, "{err:e}");
    }

    #[test]
    fn profile_ignores_labelling(
        b1 in 0.5f64..1.0, gap in 0.2f64..0.5, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0,
    ) {
        let g = Grid::new(100.0, 1024).unwrap();
        let p = MultisolitonParams::new(vec![b1, b1 + gap], vec![c1, c2]).unwrap();
        let a = profile(&p, &g).unwrap();
        let b = profile(&p.permuted(&[1, 0]).unwrap(), &g).unwrap();
        prop_assert!(a.sub(&b).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn time_evolution_moves_positions(t in -0.5f64..0.5) {
        let g = Grid::new(100.0, 1024).unwrap();
        let p = MultisolitonParams::new(vec![0.6, 1.0], vec![-2.0, 1.0]).unwrap();
        let a = profile_at_time(&p, t, &g).unwrap();
        let b = profile(&p.with_c(vec![-2.0 + 4.0 * 0.36 * t, 1.0 + 4.0 * t]).unwrap(), &g).unwrap();
        prop_assert!(a.sub(&b).unwrap().sup_norm() < 1e-12);
    }
}
