//! The acceptance suite: one test per criterion, at full scale, each printing
//! a pass/fail line. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines.

use cak_core::selftest::{run_criterion, Level};

fn run(id: usize) {
    let result = run_criterion(id, Level::Full, 0xCAC0).expect("criterion run failed");
    println!("{}", result.line());
    assert!(result.pass, "{}", result.line());
}

#[test]
fn criterion_01_mu_calculus_automata_equivalence() {
    run(1);
}

#[test]
fn criterion_02_mso_to_automata_over_trees() {
    run(2);
}

#[test]
fn criterion_03_simulation_theorem() {
    run(3);
}

#[test]
fn criterion_04_closure_operations() {
    run(4);
}

#[test]
fn criterion_05_bad_trace_detector() {
    run(5);
}

#[test]
fn criterion_06_uniform_construction_laws() {
    run(6);
}

#[test]
fn criterion_07_inadequacy_replay() {
    run(7);
}

#[test]
fn criterion_08_supported_neighborhood_matching() {
    run(8);
}

#[test]
fn criterion_09_unravelling_acceptance_transfer() {
    run(9);
}

#[test]
fn criterion_10_mu_to_mso_and_monotone_agreement() {
    run(10);
}

#[test]
fn criterion_11_parity_solver_oracle() {
    run(11);
}
