use std::sync::Arc;

use varcont::functional::{dual_norm, energy, gradient, k_norm, Problem};
use varcont::nonlinearity::{Nonlinearity, Potential, RadialProfile};
use varcont::radial::{make_grid, DomainKind, RadialField, RadialGrid};
use varcont::solvers::{
    mountain_pass, newton_refine, shooting_ball_ground_state, shooting_ground_state,
    MountainPassConfig, NewtonOptions,
};
use varcont::Error;

fn whole_space(n: usize) -> Arc<RadialGrid> {
    make_grid(3, 20.0, n, DomainKind::TruncatedWholeSpace).unwrap()
}

fn cubic() -> Nonlinearity {
    Nonlinearity::pure_power(3.0).unwrap()
}

fn relative_residual(p: &Problem, u: &RadialField, lambda: f64) -> f64 {
    let shift = p.preconditioner_shift(lambda);
    dual_norm(&gradient(p, u, lambda), shift).unwrap() / k_norm(u, shift)
}

#[test]
fn mountain_pass_matches_shooting_oracle() {
    let g = whole_space(2000);
    let p = Problem::autonomous(&g, cubic());
    let cfg = MountainPassConfig::default();
    for lambda in [0.5, 1.0, 2.0] {
        let rec = mountain_pass(&p, lambda, &cfg, None).unwrap();
        let oracle = shooting_ground_state(3, lambda, &cubic(), &g).unwrap();
        let m = energy(&p, &oracle, lambda);
        assert!(rec.converged && rec.positive && rec.descent_monotone);
        assert!(rec.level > 0.0);
        assert!(
            rec.u.axpy(-1.0, &oracle).sup_norm() <= 1e-3 * oracle.sup_norm(),
            "λ = {lambda}: sup distance {}",
            rec.u.axpy(-1.0, &oracle).sup_norm()
        );
        assert!(
            (rec.level - m).abs() <= 1e-3 * m,
            "λ = {lambda}: {} vs {m}",
            rec.level
        );
        assert!(rec.pohozaev_residual.unwrap().abs() <= 1e-3);
        assert!(rec.energy_identity_residual.unwrap().abs() <= 1e-3);
        assert!(rec.nehari_residual.abs() <= 1e-3);
    }
}

#[test]
fn converged_record_respects_tolerance_and_sign() {
    let g = whole_space(600);
    let p = Problem::autonomous(&g, cubic());
    let cfg = MountainPassConfig::default();
    let rec = mountain_pass(&p, 1.0, &cfg, None).unwrap();
    assert!(rec.converged);
    assert!(rec.grad_residual <= cfg.grad_tol);
    let n = g.interior();
    assert_eq!(rec.positive, rec.u.values()[..=n].iter().all(|&x| x > 0.0));
    assert!(rec.u.at_origin() > 0.0);
}

#[test]
fn warm_start_needs_fewer_outer_iterations() {
    let g = whole_space(1000);
    let p = Problem::autonomous(&g, cubic());
    let cfg = MountainPassConfig::default();
    let base = mountain_pass(&p, 1.0, &cfg, None).unwrap();
    let cold = mountain_pass(&p, 1.05, &cfg, None).unwrap();
    let warm = mountain_pass(&p, 1.05, &cfg, Some(&base.u)).unwrap();
    assert!(warm.converged && cold.converged);
    assert!(
        warm.iterations < cold.iterations,
        "warm {} vs cold {}",
        warm.iterations,
        cold.iterations
    );
    assert!((warm.level - cold.level).abs() <= 1e-8 * cold.level);
}

#[test]
fn warm_start_with_negative_sign_is_flipped() {
    let g = whole_space(600);
    let p = Problem::autonomous(&g, cubic());
    let cfg = MountainPassConfig::default();
    let base = mountain_pass(&p, 1.0, &cfg, None).unwrap();
    let rec = mountain_pass(&p, 1.0, &cfg, Some(&base.u.scale(-1.0))).unwrap();
    assert!(rec.positive);
    assert!((rec.level - base.level).abs() <= 1e-8 * base.level);
}

#[test]
fn forced_problem_without_forcing_is_the_ball_ground_state() {
    let g = make_grid(3, 1.0, 1000, DomainKind::Ball).unwrap();
    let p = Problem::forced(&g, 3.0, RadialField::zeros(&g)).unwrap();
    let rec = mountain_pass(&p, 0.0, &MountainPassConfig::default(), None).unwrap();
    let shot = shooting_ball_ground_state(3, 3.0, &g).unwrap();
    let oracle = newton_refine(&p, &shot, 0.0, &NewtonOptions::default()).unwrap();
    assert!(rec.converged && rec.positive);
    let d = rec.u.axpy(-1.0, &oracle).sup_norm();
    assert!(d <= 1e-3, "sup distance {d}");
}

#[test]
fn saturating_and_mixed_nonlinearities_converge() {
    let g = whole_space(800);
    let cfg = MountainPassConfig::default();
    for (nl, lambda) in [
        (Nonlinearity::SaturatingCubic, 0.5),
        (
            Nonlinearity::power_sum([(-1.0, 2.0), (1.0, 3.0)]).unwrap(),
            0.1,
        ),
        (
            Nonlinearity::power_sum([(1.0, 3.0), (-0.5, 1.5)]).unwrap(),
            1.0,
        ),
    ] {
        let p = Problem::autonomous(&g, nl.clone());
        let rec = mountain_pass(&p, lambda, &cfg, None)
            .unwrap_or_else(|e| panic!("{nl} at λ = {lambda}: {e}"));
        assert!(rec.converged, "{nl}: residual {}", rec.grad_residual);
        assert!(rec.positive && rec.level > 0.0);
    }
}

#[test]
fn saturating_close_to_lambda_star_finds_an_endpoint() {
    // The default bump has Rayleigh quotient above 1 − 0.95 on this grid.
    let p = Problem::autonomous(&whole_space(400), Nonlinearity::SaturatingCubic);
    let rec = mountain_pass(&p, 0.95, &MountainPassConfig::default(), None).unwrap();
    assert!(rec.converged && rec.positive);
}

#[test]
fn warm_start_without_negative_end_falls_back_to_cold() {
    let p = Problem::autonomous(&whole_space(400), Nonlinearity::SaturatingCubic);
    let cfg = MountainPassConfig::default();
    let w = mountain_pass(&p, 0.85, &cfg, None).unwrap().u;
    let quotient = varcont::radial::norms(&w, 0.0).grad_sq / varcont::radial::norms(&w, 0.0).l2_sq;
    assert!(
        quotient > 1.0 - 0.9,
        "ray through the warm start reaches negative energy"
    );
    let warm = mountain_pass(&p, 0.9, &cfg, Some(&w)).unwrap();
    let cold = mountain_pass(&p, 0.9, &cfg, None).unwrap();
    assert!(warm.converged);
    assert!((warm.level - cold.level).abs() <= 1e-8 * cold.level);
}

#[test]
fn weighted_problem_converges() {
    let g = whole_space(800);
    let v = Potential::Radial(RadialProfile::new("1 + exp(-r^2)", false, |r| {
        1.0 + (-r * r).exp()
    }));
    let p = Problem::weighted(&g, cubic(), v).unwrap();
    let rec = mountain_pass(&p, 1.0, &MountainPassConfig::default(), None).unwrap();
    assert!(rec.converged && rec.positive);
    assert!(rec.pohozaev_residual.is_none());
    // A larger weight lowers the level relative to V ≡ 1.
    let flat = mountain_pass(
        &Problem::autonomous(&g, cubic()),
        1.0,
        &MountainPassConfig::default(),
        None,
    )
    .unwrap();
    assert!(rec.level < flat.level);
}

#[test]
fn inadmissible_lambda_is_refused() {
    let g = whole_space(400);
    let p = Problem::autonomous(&g, Nonlinearity::SaturatingCubic);
    let cfg = MountainPassConfig::default();
    assert!(matches!(
        mountain_pass(&p, 1.0, &cfg, None),
        Err(Error::LambdaOutOfRange { .. })
    ));
    let c = Problem::autonomous(&g, cubic());
    assert!(matches!(
        mountain_pass(&c, -0.5, &cfg, None),
        Err(Error::LambdaOutOfRange { .. })
    ));
}

#[test]
fn shooting_profiles_obey_the_exact_scaling() {
    // u_4(r) = 2·u_1(2r); the λ = 4 profile is sampled on half the radius.
    let g1 = make_grid(3, 20.0, 4000, DomainKind::TruncatedWholeSpace).unwrap();
    let g4 = make_grid(3, 10.0, 4000, DomainKind::TruncatedWholeSpace).unwrap();
    let u1 = shooting_ground_state(3, 1.0, &cubic(), &g1).unwrap();
    let u4 = shooting_ground_state(3, 4.0, &cubic(), &g4).unwrap();
    let scaled = u1.scale(2.0);
    let d = u4
        .values()
        .iter()
        .zip(scaled.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(d <= 1e-3, "sup distance {d}");
}

#[test]
fn shooting_profile_is_decreasing_and_nearly_critical() {
    let g = whole_space(2000);
    let u = shooting_ground_state(3, 1.0, &cubic(), &g).unwrap();
    assert!(u.values().windows(2).all(|w| w[1] <= w[0]));
    let p = Problem::autonomous(&g, cubic());
    assert!(relative_residual(&p, &u, 1.0) < 1e-3);
}

#[test]
fn newton_contracts_coarse_shooting_output() {
    let g = whole_space(300);
    let p = Problem::autonomous(&g, cubic());
    let u = shooting_ground_state(3, 1.0, &cubic(), &g).unwrap();
    let before = relative_residual(&p, &u, 1.0);
    let refined = newton_refine(&p, &u, 1.0, &NewtonOptions::default()).unwrap();
    let after = relative_residual(&p, &refined, 1.0);
    assert!(after <= 1e-2 * before, "{before} -> {after}");
}

#[test]
fn newton_leaves_critical_points_alone() {
    let g = whole_space(600);
    let p = Problem::autonomous(&g, cubic());
    let rec = mountain_pass(&p, 1.0, &MountainPassConfig::default(), None).unwrap();
    let again = newton_refine(&p, &rec.u, 1.0, &NewtonOptions::default()).unwrap();
    assert!(again.axpy(-1.0, &rec.u).sup_norm() <= 1e-10 * rec.u.sup_norm());
}
