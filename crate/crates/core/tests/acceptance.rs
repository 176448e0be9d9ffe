//! Acceptance suite on the bundled reference configuration. Each test prints
//! one PASS/FAIL line for its criterion.

use std::io::Write;
use std::sync::OnceLock;

use varcont::acceptance::{Outcome, Suite, CRITERIA};
use varcont::config::{RunConfig, REFERENCE_TOML};

struct Shared {
    suite: Suite,
    _dir: tempfile::TempDir,
}

fn shared() -> &'static Shared {
    static S: OnceLock<Shared> = OnceLock::new();
    S.get_or_init(|| {
        let cfg = RunConfig::from_toml(REFERENCE_TOML)
            .and_then(RunConfig::validated)
            .expect("reference config");
        let dir = tempfile::tempdir().expect("tempdir");
        Shared {
            suite: Suite::new(cfg, dir.path()),
            _dir: dir,
        }
    })
}

fn criterion(id: usize) {
    let o: Outcome = shared().suite.run(id);
    // Written to the stderr handle directly so the line survives output capture.
    let _ = writeln!(std::io::stderr().lock(), "{o}");
    assert!(
        o.passed,
        "criterion {id} ({}) failed:\n{o}",
        o.criterion.name
    );
}

#[test]
fn criterion_list_is_complete() {
    assert_eq!(CRITERIA.len(), 12);
}

#[test]
fn c01_oracle_equivalence() {
    criterion(1);
}

#[test]
fn c02_critical_point_identities() {
    criterion(2);
}

#[test]
fn c03_scaling_law() {
    criterion(3);
}

#[test]
fn c04_monotonicity_continuity() {
    criterion(4);
}

#[test]
fn c05_transfer() {
    criterion(5);
}

#[test]
fn c06_lambda_star() {
    criterion(6);
}

#[test]
fn c07_hypotheses() {
    criterion(7);
}

#[test]
fn c08_forced_barrier() {
    criterion(8);
}

#[test]
fn c09_positivity_threshold() {
    criterion(9);
}

#[test]
fn c10_limit_study() {
    criterion(10);
}

#[test]
fn c11_gradient_consistency() {
    criterion(11);
}

#[test]
fn c12_determinism() {
    criterion(12);
}
