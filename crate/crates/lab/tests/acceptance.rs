//! Acceptance criteria 1 to 11, one test each. Every test prints a single
//! pass/fail line to stderr.

use std::io::Write;

use solitonlab::acceptance::{run_criterion, DEFAULT_SEED};

fn check(id: u32) {
    let v = run_criterion(id, DEFAULT_SEED);
    let _ = writeln!(
        std::io::stderr(),
        "criterion {id:>2} {}: {}: {}",
        if v.passed { "PASS" } else { "FAIL" },
        v.name,
        v.detail
    );
    assert!(v.passed, "criterion {id} failed: {}", v.detail);
}

#[test]
fn criterion_01_cauchy_identity() {
    check(1);
}

#[test]
fn criterion_02_one_soliton_reduction() {
    check(2);
}

#[test]
fn criterion_03_conserved_functionals() {
    check(3);
}

#[test]
fn criterion_04_transmission_coefficient() {
    check(4);
}

#[test]
fn criterion_05_trace_normalization() {
    check(5);
}

#[test]
fn criterion_06_alpha_routes_agree() {
    check(6);
}

#[test]
fn criterion_07_large_kappa_envelope() {
    check(7);
}

#[test]
fn criterion_08_solver_fidelity() {
    check(8);
}

#[test]
fn criterion_09_variational_gap_nonnegative() {
    check(9);
}

#[test]
fn criterion_10_molecular_decomposition() {
    check(10);
}

#[test]
fn criterion_11_orbital_stability() {
    check(11);
}
