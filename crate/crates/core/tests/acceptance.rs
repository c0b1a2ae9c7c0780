//! Acceptance criteria AC1..AC10. Each test prints one summary line and
//! fails unless its criterion passes; every tolerance lives in `roict::bench`.
//! The tests share one lock so that runtime budgets are measured without
//! competing work. Lines go straight to stderr so they show up without
//! `--nocapture`.

use std::io::Write;
use std::sync::Mutex;

use roict::bench::{evaluate, BenchOptions, Status};

static SERIAL: Mutex<()> = Mutex::new(());

fn check(criterion: &str) {
    let _guard = SERIAL.lock().unwrap_or_else(|p| p.into_inner());
    let result = evaluate(criterion, &BenchOptions::default());
    let mut err = std::io::stderr().lock();
    writeln!(err, "{}", result.summary_line()).unwrap();
    for c in &result.checks {
        writeln!(err, "    {}: {:.6e} vs {:.6e} {}", c.name, c.value, c.tolerance, if c.pass { "ok" } else { "FAILED" }).unwrap();
    }
    if let Some(m) = &result.message {
        writeln!(err, "    {m}").unwrap();
    }
    drop(err);
    assert_eq!(result.status, Status::Pass, "{}", result.summary_line());
}

#[test]
fn ac1_adjoint_identities() {
    check("AC1");
}

#[test]
fn ac2_prox_closed_forms() {
    check("AC2");
}

#[test]
fn ac3_cauchy_majorant() {
    check("AC3");
}

#[test]
fn ac4_dbfb_matches_primal_dual_oracle() {
    check("AC4");
}

#[test]
fn ac5_majorize_minimize_descent() {
    check("AC5");
}

#[test]
fn ac6_step_size_validation() {
    check("AC6");
}

#[test]
fn ac7_unrolled_equivalence() {
    check("AC7");
}

#[test]
fn ac8_desk_scale_wire_experiment() {
    check("AC8");
}

#[test]
fn ac9_cli_determinism() {
    check("AC9");
}

#[test]
fn ac10_tuner() {
    check("AC10");
}
