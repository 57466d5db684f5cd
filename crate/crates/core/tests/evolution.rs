use solitonlab_core::kdv_evolve::{evolve, BoundaryPolicy, EvolutionState, EvolveConfig};
use solitonlab_core::multisoliton::{one_soliton, profile, profile_at_time, MultisolitonParams};
use solitonlab_core::spectral_grid::{norm_sq, Field, Grid, SobolevSpec};
use solitonlab_core::spectral_invariants::{alpha_series, WindowOptions};
use solitonlab_core::Error;

fn soliton_error(dt: f64) -> f64 {
    let g = Grid::new(60.0, 1024).unwrap();
    let q = one_soliton(1.0, -4.0, 0.0, &g).unwrap();
    let cfg = EvolveConfig {
        dt,
        samples: 2,
        boundary_policy: BoundaryPolicy::Warn,
        ..Default::default()
    };
    let tr = evolve(&q, 1.0, &[], &cfg).unwrap();
    let exact = one_soliton(1.0, -4.0, 1.0, &g).unwrap();
    tr.final_state().sub(&exact).unwrap().l2_norm()
}

#[test]
fn one_soliton_fourth_order() {
    let coarse = soliton_error(2e-3);
    let fine = soliton_error(1e-3);
    assert!(fine < 1e-6, "{fine:e}");
    let ratio = coarse / fine;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn soliton_conserves_functionals() {
    let g = Grid::new(60.0, 1024).unwrap();
    let q = one_soliton(1.2, -4.0, 0.0, &g).unwrap();
    let cfg = EvolveConfig {
        dt: 2.5e-4,
        samples: 5,
        ..Default::default()
    };
    let tr = evolve(&q, 1.0, &[], &cfg).unwrap();
    let d = &tr.drift.max_drift;
    assert!(
        d.integral < 1e-9 && d.momentum < 1e-9 && d.energy < 1e-9,
        "{d:?}"
    );
    assert!(tr.boundary_exceeded_at.is_none());
}

#[test]
fn two_soliton_collision() {
    let g = Grid::new(100.0, 2048).unwrap();
    let p = MultisolitonParams::new(vec![1.0, 2.0], vec![-5.0, 5.0]).unwrap();
    let q = profile(&p, &g).unwrap();
    let cfg = EvolveConfig {
        dt: 1e-4,
        samples: 9,
        boundary_policy: BoundaryPolicy::Warn,
        ..Default::default()
    };
    let tr = evolve(&q, 2.0, &[], &cfg).unwrap();
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let err = s
            .sub(&profile_at_time(&p, *t, &g).unwrap())
            .unwrap()
            .l2_norm();
        assert!(err < 1e-5, "t = {t}: {err:e}");
    }
}

#[test]
fn backward_run_returns_to_start() {
    let g = Grid::new(60.0, 1024).unwrap();
    let p = MultisolitonParams::new(vec![0.8, 1.3], vec![-3.0, 0.0]).unwrap();
    let q = profile(&p, &g).unwrap();
    let cfg = EvolveConfig {
        dt: 5e-4,
        samples: 2,
        boundary_policy: BoundaryPolicy::Warn,
        ..Default::default()
    };
    let fwd = evolve(&q, 1.0, &[], &cfg).unwrap();
    let back = evolve(fwd.final_state(), -1.0, &[], &cfg).unwrap();
    let err = back.final_state().sub(&q).unwrap().l2_norm();
    assert!(err < 1e-7, "{err:e}");
    assert!((back.times[1] + 1.0).abs() < 1e-12);
}

#[test]
fn nonlinear_product_stays_dealiased() {
    let g = Grid::new(40.0, 256).unwrap();
    let q = Field::from_fn(g, |x| {
        -0.5 * (-x * x / 4.0).exp() * (1.0 + 0.3 * (2.0 * x).cos())
    })
    .unwrap();
    // Remove everything outside the retained band first.
    let mut s = EvolutionState::new(&q, 1e-3, 1.0).unwrap();
    let keep: Vec<bool> = s.mask().to_vec();
    let spec: Vec<_> = s
        .spectrum()
        .iter()
        .zip(&keep)
        .map(|(z, k)| if *k { *z } else { 0.0.into() })
        .collect();
    let m = g.points() as f64;
    let band: Vec<f64> = {
        let mut buf = spec.clone();
        solitonlab_core::spectral_grid::FftPair::new(g.points()).inverse(&mut buf);
        buf.iter().map(|z| z.re / m).collect()
    };
    s = EvolutionState::new(&Field::new(g, band).unwrap(), 1e-3, 1.0).unwrap();
    for _ in 0..50 {
        s.advance().unwrap();
        for (z, k) in s.spectrum().iter().zip(&keep) {
            if !k {
                assert!(z.norm() < 1e-12 * m, "{z}");
            }
        }
    }
}

#[test]
fn alpha_sandwich_along_trajectory() {
    let g = Grid::new(40.0, 256).unwrap();
    let q = Field::from_fn(g, |x| 0.05 * (-x * x / 2.0).exp() * (1.5 * x).cos()).unwrap();
    let kappa = 4.0;
    let hk = |f: &Field| norm_sq(f, &SobolevSpec::h_minus_one_kappa(kappa).unwrap());
    assert!(kappa >= 1.0 + 64.0 * hk(&q));
    let a0 = alpha_series(&q, kappa, 1e-14).unwrap();
    let upper = 8.0 / 7.0 * hk(&q);
    assert!(2.0 * kappa * a0 <= upper);
    let cfg = EvolveConfig {
        dt: 1e-3,
        samples: 6,
        boundary_policy: BoundaryPolicy::Warn,
        ..Default::default()
    };
    let tr = evolve(&q, 1.0, &[], &cfg).unwrap();
    for s in &tr.states {
        assert!(2.0 / 3.0 * hk(s) <= 2.0 * kappa * a0);
    }
}

#[test]
fn alpha_monitor_on_periodic_two_soliton() {
    let g = Grid::new(50.0, 1024).unwrap();
    let base = profile(
        &MultisolitonParams::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap(),
        &g,
    )
    .unwrap();
    let bump = Field::from_fn(g, |x| {
        0.01 * (-(x - 3.0f64).powi(2) / 4.0).exp() * (2.0 * x).cos()
    })
    .unwrap();
    let q = base.add(&bump).unwrap();
    let cfg = EvolveConfig {
        dt: 1e-4,
        samples: 3,
        boundary_policy: BoundaryPolicy::Warn,
        alpha_window: WindowOptions::default(),
        ..Default::default()
    };
    let tr = evolve(&q, 1.0, &[10.0], &cfg).unwrap();
    assert!(
        tr.drift.max_drift.alpha[0] < 1e-8,
        "{:?}",
        tr.drift.max_drift
    );
    assert_eq!(tr.drift.history.len(), 3);
}

#[test]
fn boundary_abort_and_blow_up_are_reported() {
    let g = Grid::new(30.0, 256).unwrap();
    let q = one_soliton(1.0, 10.0, 0.0, &g)
        .unwrap_or_else(|_| Field::from_fn(g, |x| -2.0 / (x - 10.0).cosh().powi(2)).unwrap());
    let cfg = EvolveConfig {
        dt: 1e-3,
        ..Default::default()
    };
    assert!(matches!(
        evolve(&q, 1.0, &[], &cfg),
        Err(Error::DomainTooSmall(_))
    ));

    let g = Grid::new(20.0, 128).unwrap();
    let q = Field::from_fn(g, |x| -60.0 / x.cosh().powi(2)).unwrap();
    let mut s = EvolutionState::new(&q, 0.05, f64::INFINITY).unwrap();
    let err = (0..2000).find_map(|_| s.advance().err()).expect("blows up");
    match err {
        Error::BlowUp {
            last_valid,
            last_valid_time,
            ..
        } => {
            assert!(last_valid.iter().all(|v| v.is_finite()));
            assert!(last_valid_time >= 0.0);
        }
        e => panic!("unexpected {e:?}"),
    }
}
