use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solitonlab_core::molecular::{
    cauchy_step_exact, composed_params, molecular_error, molecular_error_direct, rational,
    MolecularLayout, MoleculeGroup,
};
use solitonlab_core::multisoliton::profile;
use solitonlab_core::spectral_grid::{Field, Grid};

#[test]
fn cauchy_identity_holds_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..120 {
        let n = 1 + case % 5;
        let mut small = || rational(rng.gen_range(-40..=40), rng.gen_range(1..=9));
        let d: Vec<Vec<_>> = (0..n).map(|_| (0..n).map(|_| small()).collect()).collect();
        let a: Vec<_> = (0..n).map(|_| small()).collect();
        let mut pool: Vec<i64> = (1..=30).collect();
        let betas: Vec<_> = (0..=n)
            .map(|_| {
                let k = rng.gen_range(0..pool.len());
                rational(pool.swap_remove(k), 7)
            })
            .collect();
        let (lhs, rhs) = cauchy_step_exact(&d, &a, &betas).unwrap();
        assert_eq!(lhs, rhs, "case {case}");
    }
}

#[test]
fn two_group_error_decays_exponentially() {
    let g = Grid::new(100.0, 1024).unwrap();
    let seps = [10.0, 15.0, 20.0, 25.0, 30.0];
    let errs: Vec<f64> = seps
        .iter()
        .map(|&d| {
            let l = MolecularLayout::evenly_spaced(&[vec![1.0], vec![2.0]], d).unwrap();
            molecular_error(&l, &g).unwrap()
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[4] < 1e-3);
    // Least-squares slope of ln(error) against separation.
    let n = seps.len() as f64;
    let (mx, my) = (
        seps.iter().sum::<f64>() / n,
        errs.iter().map(|e| e.ln()).sum::<f64>() / n,
    );
    let num: f64 = seps
        .iter()
        .zip(&errs)
        .map(|(x, e)| (x - mx) * (e.ln() - my))
        .sum();
    let den: f64 = seps.iter().map(|x| (x - mx).powi(2)).sum();
    let rate = -num / den;
    assert!(rate >= 0.5, "rate {rate}");
}

#[test]
fn cancellation_free_error_agrees_where_both_resolve() {
    let g = Grid::new(80.0, 1024).unwrap();
    let l = MolecularLayout::new(vec![
        MoleculeGroup {
            beta: vec![0.6, 1.1],
            c: vec![-1.0, 0.5],
            x: -6.0,
        },
        MoleculeGroup {
            beta: vec![1.6],
            c: vec![0.0],
            x: 6.0,
        },
    ])
    .unwrap();
    let a = molecular_error(&l, &g).unwrap();
    let b = molecular_error_direct(&l, &g).unwrap();
    assert!(
        a > 1e-8 && (a - b).abs() < 1e-10 * a.max(1.0),
        "{a:e} vs {b:e}"
    );
}

#[test]
fn far_apart_groups_superpose() {
    let g = Grid::new(200.0, 4096).unwrap();
    let l = MolecularLayout::evenly_spaced(&[vec![0.8], vec![1.3, 1.9], vec![2.4]], 40.0).unwrap();
    let whole = profile(&composed_params(&l), &g).unwrap();
    let mut parts = Field::zeros(g);
    for j in 0..l.group_count() {
        parts = parts
            .add(&profile(&l.placed_group(j), &g).unwrap())
            .unwrap();
    }
    let err = whole.sub(&parts).unwrap().l2_norm();
    assert!(err < 1e-10, "{err:e}");
}
