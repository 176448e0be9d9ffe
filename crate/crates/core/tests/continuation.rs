use std::sync::Arc;

use varcont::continuation::{
    branch_limit_check, diagnose, lambda_range, ps_transfer_check, scaling_check, sweep,
    write_branch_csv, write_profiles, Branch, BRANCH_COLUMNS,
};
use varcont::functional::Problem;
use varcont::nonlinearity::{Nonlinearity, Potential, RadialProfile};
use varcont::radial::{make_grid, DomainKind, RadialField, RadialGrid};
use varcont::solvers::MountainPassConfig;

fn grid(n: usize) -> Arc<RadialGrid> {
    make_grid(3, 20.0, n, DomainKind::TruncatedWholeSpace).unwrap()
}

fn cubic_problem(n: usize) -> Problem {
    Problem::autonomous(&grid(n), Nonlinearity::pure_power(3.0).unwrap())
}

fn cubic_branch(n: usize, start: f64, stop: f64, step: f64, warm: bool) -> Branch {
    let lambdas = lambda_range(start, stop, step).unwrap();
    sweep(
        &cubic_problem(n),
        &lambdas,
        &MountainPassConfig::default(),
        warm,
    )
    .unwrap()
}

#[test]
fn reference_sweep_is_complete_and_monotone() {
    let b = cubic_branch(500, 0.5, 2.0, 0.05, true);
    assert_eq!(b.records.len(), 31);
    assert!(b.gaps.is_empty());
    assert!(b.warm_started);
    assert!(b.records.windows(2).all(|w| w[1].lambda > w[0].lambda));
    let d = diagnose(&b);
    assert!(d.monotone);
    assert!(d.levels_interval.0 > 0.0 && d.levels_interval.1.is_finite());
    assert!(d.coercivity.as_ref().unwrap().holds);
    assert!(d.scaling_report.as_ref().unwrap().max_relative_deviation < 1e-2);
}

#[test]
fn saturating_sweep_leaves_a_gap_beyond_lambda_star() {
    let p = Problem::autonomous(&grid(400), Nonlinearity::SaturatingCubic);
    let b = sweep(&p, &[0.5, 0.6, 1.2], &MountainPassConfig::default(), true).unwrap();
    assert_eq!(b.records.len(), 2);
    assert_eq!(b.gaps.len(), 1);
    assert_eq!(b.gaps[0].lambda, 1.2);
    assert!(b.gaps[0].reason.contains("λ*"), "{}", b.gaps[0].reason);
}

#[test]
fn single_point_branch_is_degenerate_but_well_defined() {
    let b = sweep(
        &cubic_problem(300),
        &[1.0],
        &MountainPassConfig::default(),
        false,
    )
    .unwrap();
    assert_eq!(b.records.len(), 1);
    let d = diagnose(&b);
    assert!(d.monotone);
    assert_eq!(d.max_level_jump, 0.0);
    assert_eq!(d.max_field_jump, 0.0);
    assert_eq!(d.levels_interval.0, d.levels_interval.1);
}

#[test]
fn empty_or_unsorted_grids_are_rejected() {
    let p = cubic_problem(300);
    let cfg = MountainPassConfig::default();
    assert!(sweep(&p, &[], &cfg, true).is_err());
    assert!(sweep(&p, &[1.0, 0.5], &cfg, true).is_err());
}

#[test]
fn halving_the_step_roughly_halves_the_jumps() {
    let coarse = diagnose(&cubic_branch(400, 0.5, 1.0, 0.1, true));
    let fine = diagnose(&cubic_branch(400, 0.5, 1.0, 0.05, true));
    let level_ratio = fine.max_level_jump / coarse.max_level_jump;
    let field_ratio = fine.max_field_jump / coarse.max_field_jump;
    assert!((0.4..0.6).contains(&level_ratio), "{level_ratio}");
    assert!((0.4..0.6).contains(&field_ratio), "{field_ratio}");
}

#[test]
fn cubic_levels_scale_with_square_root() {
    let b = sweep(
        &cubic_problem(1000),
        &[1.0, 4.0],
        &MountainPassConfig::default(),
        false,
    )
    .unwrap();
    let r = scaling_check(&b, 1.0).unwrap();
    assert_eq!(r.theta, 0.5);
    let e4 = r.entries.iter().find(|e| e.lambda == 4.0).unwrap();
    assert!((e4.ratio - 2.0).abs() < 2e-2, "m_4/m_1 = {}", e4.ratio);
    let e1 = r.entries.iter().find(|e| e.lambda == 1.0).unwrap();
    assert_eq!(e1.ratio, 1.0);
}

#[test]
fn quadratic_levels_scale_with_exponent_three_halves() {
    let p = Problem::autonomous(&grid(800), Nonlinearity::pure_power(2.0).unwrap());
    let b = sweep(
        &p,
        &[0.5, 1.0, 1.5, 2.0],
        &MountainPassConfig::default(),
        true,
    )
    .unwrap();
    let r = scaling_check(&b, 1.0).unwrap();
    assert_eq!(r.theta, 1.5);
    assert!(
        r.max_relative_deviation < 1e-2,
        "{}",
        r.max_relative_deviation
    );
}

#[test]
fn scaling_check_rejects_other_nonlinearities() {
    let p = Problem::autonomous(&grid(300), Nonlinearity::SaturatingCubic);
    let b = sweep(&p, &[0.5], &MountainPassConfig::default(), false).unwrap();
    assert!(scaling_check(&b, 0.5).is_err());
}

#[test]
fn transfer_bounds_hold_and_catch_perturbations() {
    let mut b = cubic_branch(500, 0.8, 1.2, 0.05, true);
    let report = ps_transfer_check(&b, 1.0).unwrap();
    assert!(report.all_hold);
    let at = report.entries.iter().find(|e| e.lambda == 1.0).unwrap();
    assert_eq!(at.residual, b.record_at(1.0).unwrap().grad_norm);
    let c = report.lipschitz_constant.unwrap();
    assert!(c.is_finite() && c > 0.0);
    let slope = report.residual_decay_exponent.unwrap();
    assert!((slope - 1.0).abs() < 0.1, "decay exponent {slope}");

    // Negative control: perturb the field at λ0 without updating its record.
    let g = b.problem.grid().clone();
    let noise = RadialField::from_fn(&g, |r| 0.05 * (3.0 * r).sin() * (-r).exp());
    let k = b.records.iter().position(|r| r.lambda == 1.0).unwrap();
    b.records[k].u = b.records[k].u.axpy(1.0, &noise);
    assert!(!ps_transfer_check(&b, 1.0).unwrap().all_hold);

    assert!(ps_transfer_check(&b, 3.0).is_err());
}

#[test]
fn branch_converges_linearly_at_lambda0() {
    let b = cubic_branch(500, 0.8, 1.2, 0.05, true);
    let r = branch_limit_check(&b, 1.0, 4).unwrap();
    assert_eq!(r.entries.len(), 9);
    let own = r.entries.iter().find(|e| e.lambda == 1.0).unwrap();
    assert_eq!(own.h1_distance, 0.0);
    let slope = r.decay_exponent.unwrap();
    assert!((slope - 1.0).abs() < 0.15, "decay exponent {slope}");
    assert!(branch_limit_check(&b, 1.01, 2).is_err());
}

#[test]
fn warm_and_cold_sweeps_agree() {
    let warm = cubic_branch(500, 0.5, 1.5, 0.25, true);
    let cold = cubic_branch(500, 0.5, 1.5, 0.25, false);
    assert_eq!(warm.records.len(), cold.records.len());
    for (w, c) in warm.records.iter().zip(&cold.records) {
        assert_eq!(w.lambda, c.lambda);
        assert!(varcont::continuation::h1_distance(&w.u, &c.u) < 1e-3);
    }
}

#[test]
fn weighted_branch_satisfies_the_coercivity_bound() {
    let g = grid(500);
    let v = Potential::Radial(RadialProfile::new("2 - exp(-r)", false, |r| {
        2.0 - (-r).exp()
    }));
    let p = Problem::weighted(&g, Nonlinearity::pure_power(3.0).unwrap(), v).unwrap();
    let b = sweep(&p, &[0.5, 1.0, 1.5], &MountainPassConfig::default(), true).unwrap();
    assert_eq!(b.records.len(), 3);
    let d = diagnose(&b);
    let c = d.coercivity.unwrap();
    assert_eq!(c.mu, 4.0);
    assert!(c.holds, "ratio {}", c.max_ratio);
    assert!(d.monotone);
    assert!(d.scaling_report.is_none());
}

#[test]
fn branch_csv_has_the_documented_columns() {
    let b = cubic_branch(300, 0.5, 1.0, 0.25, true);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("branch.csv");
    write_branch_csv(&b, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), BRANCH_COLUMNS.join(","));
    assert_eq!(lines.count(), 3);
    assert!(!text.contains('\r'));
    let first: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .take(9)
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(first[0], 0.5);
    assert_eq!(first[1], b.records[0].level);

    let files = write_profiles(&b, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let profile = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(profile.lines().count(), 1 + b.problem.grid().len());
}
