//! Critical-point solvers: a path-deformation mountain-pass method with
//! `H¹`-preconditioned descent, a radial shooting oracle, and damped Newton
//! polishing.

mod newton;
mod shooting;

pub use newton::{newton_refine, NewtonOptions};
pub use shooting::{shooting_ball_ground_state, shooting_ground_state};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{
    dual_norm, energy, energy_identity_residual, gradient, k_norm, nehari_residual,
    pohozaev_residual, Problem,
};
use crate::nonlinearity::{golden_max, lambda_star, Nonlinearity};
use crate::radial::{norms, solve_shifted, RadialField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainPassConfig {
    pub path_points: usize,
    pub max_outer_iters: usize,
    /// Tolerance on the relative preconditioned gradient norm.
    pub grad_tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub reparametrize_every: usize,
    /// Relative residual at which the path iteration hands over to Newton.
    pub newton_handoff: f64,
    /// Solve with `g(s⁺)` in λ-family modes so the critical point is positive.
    pub force_positive: bool,
}

impl Default for MountainPassConfig {
    fn default() -> Self {
        Self {
            path_points: 41,
            max_outer_iters: 5000,
            grad_tol: 1e-8,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            reparametrize_every: 10,
            newton_handoff: 1e-3,
            force_positive: true,
        }
    }
}

impl MountainPassConfig {
    pub fn validate(&self) -> Result<()> {
        if self.path_points < 5 {
            return Err(Error::Config(format!(
                "path_points must be at least 5, got {}",
                self.path_points
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!(
                "shrink must lie in ]0, 1[, got {}",
                self.shrink
            )));
        }
        if !(self.initial_step > 0.0) || !(self.sufficient_decrease > 0.0) {
            return Err(Error::Config("step parameters must be positive".into()));
        }
        if self.reparametrize_every == 0 {
            return Err(Error::Config(
                "reparametrize_every must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A computed critical point together with its diagnostics.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    /// `λ`, or the forcing amplitude in forced mode.
    pub lambda: f64,
    pub u: RadialField,
    pub level: f64,
    /// `‖K⁻¹ I'(u)‖_K / ‖u‖_K` with `K = -Δ_h + max(λ, 1)`.
    pub grad_residual: f64,
    /// Absolute dual norm of `I'(u)` for `K = -Δ_h + 1`, comparable across `λ`.
    pub grad_norm: f64,
    /// Normalized Pohozaev residual (autonomous mode only).
    pub pohozaev_residual: Option<f64>,
    /// `I'(u)u / ‖u‖²_{H¹_λ}`.
    pub nehari_residual: f64,
    /// `|I_λ(u) − ‖∇u‖²/N| / |I_λ(u)|` (autonomous mode only).
    pub energy_identity_residual: Option<f64>,
    pub grad_sq: f64,
    pub l2_sq: f64,
    pub positive: bool,
    pub converged: bool,
    pub iterations: usize,
    pub newton_iterations: usize,
    /// The path maximum never increased across accepted descent steps.
    pub descent_monotone: bool,
}

impl SolutionRecord {
    /// Evaluates every diagnostic of `u` as a critical point of `p` at `lambda`.
    pub fn assess(p: &Problem, u: RadialField, lambda: f64, grad_tol: f64) -> Result<Self> {
        let shift = p.preconditioner_shift(lambda);
        let grad = gradient(p, &u, lambda);
        let scale = k_norm(&u, shift);
        let dual = dual_norm(&grad, shift)?;
        let grad_residual = if scale > 0.0 { dual / scale } else { dual };
        let grad_norm = dual_norm(&grad, 1.0)?;
        let level = energy(p, &u, lambda);
        let nm = norms(&u, if p.is_lambda_family() { lambda } else { 0.0 });
        let nehari = nehari_residual(p, &u, lambda);
        let nehari_residual = if nm.h1_sq > 0.0 {
            nehari / nm.h1_sq
        } else {
            nehari
        };
        let (pohozaev_residual, energy_identity_residual) = if p.is_autonomous() {
            let poho = pohozaev_residual(p, &u, lambda)?.normalized;
            let ei = energy_identity_residual(p, &u, lambda)?;
            (
                Some(poho),
                Some(if level != 0.0 { ei / level.abs() } else { ei }),
            )
        } else {
            (None, None)
        };
        let n = u.grid().interior();
        let positive = u.values()[..=n].iter().all(|&v| v > 0.0);
        Ok(Self {
            lambda,
            level,
            grad_residual,
            grad_norm,
            pohozaev_residual,
            nehari_residual,
            energy_identity_residual,
            grad_sq: nm.grad_sq,
            l2_sq: nm.l2_sq,
            positive,
            converged: grad_residual <= grad_tol,
            iterations: 0,
            newton_iterations: 0,
            descent_monotone: true,
            u,
        })
    }

    /// `(u_n − u_{n+1}) / h` at the last interior node.
    pub fn boundary_slope(&self) -> f64 {
        let n = self.u.grid().interior();
        let v = self.u.values();
        (v[n] - v[n + 1]) / self.u.grid().spacing()
    }
}

/// Refuses `λ` outside `]0, λ*[` (autonomous) or `λ ≤ 0` (weighted).
pub fn check_admissible(p: &Problem, lambda: f64) -> Result<()> {
    if !p.is_lambda_family() {
        return Ok(());
    }
    if p.is_autonomous() {
        let ls = lambda_star(p.nonlinearity())?;
        if !ls.admits(lambda) {
            return Err(Error::LambdaOutOfRange {
                lambda,
                lambda_star: ls.value,
            });
        }
    } else if !(lambda > 0.0) {
        return Err(Error::LambdaOutOfRange {
            lambda,
            lambda_star: f64::INFINITY,
        });
    }
    Ok(())
}

const MAX_DOUBLINGS: usize = 60;

/// Fixed bump `φ(r) = max(1 − (r/ρ)², 0)²` with `ρ = min(R/2, 5)`.
pub fn endpoint_profile(p: &Problem) -> RadialField {
    bump(p, (p.grid().radius() / 2.0).min(5.0))
}

fn bump(p: &Problem, rho: f64) -> RadialField {
    RadialField::from_fn(p.grid(), |r| {
        let x = (1.0 - (r / rho).powi(2)).max(0.0);
        x * x
    })
}

// `sin(πr/R)/(πr/R)`, the principal Dirichlet mode of the ball in `N = 3`.
fn principal_mode(p: &Problem) -> RadialField {
    let k = std::f64::consts::PI / p.grid().radius();
    RadialField::from_fn(p.grid(), |r| {
        if r == 0.0 {
            1.0
        } else {
            (k * r).sin() / (k * r)
        }
    })
}

/// Finds `e = tφ` with negative energy by doubling `t` from 1, with `φ` the
/// [`endpoint_profile`] bump. The bump's Rayleigh quotient is of order `ρ⁻²`,
/// so close to `λ*` no multiple of it has negative energy; the search then
/// falls back to the principal Dirichlet mode, whose quotient `(π/R)²` is the
/// smallest the domain allows.
pub fn find_endpoint(p: &Problem, lambda: f64) -> Result<RadialField> {
    match ray_endpoint(p, lambda, &endpoint_profile(p), 1.0) {
        Err(Error::EndpointNotFound { .. }) => {
            log::debug!("endpoint search: bump failed at λ = {lambda}, trying the principal mode");
            ray_endpoint(p, lambda, &principal_mode(p), 1.0)
        }
        res => res,
    }
}

fn ray_endpoint(p: &Problem, lambda: f64, direction: &RadialField, t0: f64) -> Result<RadialField> {
    let mut t = t0;
    for _ in 0..=MAX_DOUBLINGS {
        let e = direction.scale(t);
        if energy(p, &e, lambda) < 0.0 {
            return Ok(e);
        }
        t *= 2.0;
    }
    Err(Error::EndpointNotFound {
        doublings: MAX_DOUBLINGS,
    })
}

// A path laid along the ray `t ↦ t·dir`, `t ∈ [0, t_end]`, with `I(t_end·dir) < 0`.
struct RayPeak {
    t: f64,
    energy: f64,
    t_end: f64,
}

// Samples the straight path `0 → t_end·dir` at `points` nodes, takes the
// highest node (lowest index on ties) and refines it by golden section over
// its two adjacent segments. `t_end` is doubled until the end has negative energy.
fn lay_path(
    p: &Problem,
    lambda: f64,
    dir: &RadialField,
    t_end: f64,
    points: usize,
) -> Result<RayPeak> {
    let ray = |t: f64| energy(p, &dir.scale(t), lambda);
    let mut t_end = t_end;
    let mut doublings = 0;
    while !(ray(t_end) < 0.0) {
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(Error::EndpointNotFound {
                doublings: MAX_DOUBLINGS,
            });
        }
        t_end *= 2.0;
    }
    let dt = t_end / (points - 1) as f64;
    let mut k = 0;
    let mut best = 0.0;
    for j in 1..points - 1 {
        let e = ray(j as f64 * dt);
        if e > best {
            best = e;
            k = j;
        }
    }
    if k == 0 {
        return Err(Error::CollapsedToZero { iterations: 0 });
    }
    let (t, e) = golden_max(ray, (k - 1) as f64 * dt, (k + 1) as f64 * dt, 1e-10 * dt);
    let (t, energy) = if e >= best {
        (t, e)
    } else {
        (k as f64 * dt, best)
    };
    Ok(RayPeak { t, energy, t_end })
}

/// Mountain-pass critical point of `problem` at `lambda`.
///
/// The path from 0 to a negative-energy endpoint is a straight segment of
/// `path_points` nodes. Each iteration moves its highest node `u*` by a
/// preconditioned descent step `u* − σ K⁻¹ I'(u*)` and re-lays the path by
/// linear interpolation along the ray through the moved node; `σ` is
/// backtracked until the new path maximum satisfies the sufficient-decrease
/// condition, so the path maximum decreases monotonically. The endpoint scale
/// is re-tightened every `reparametrize_every` iterations. Once the relative
/// residual reaches `newton_handoff` (or `grad_tol`, if larger), the peak is
/// polished by damped Newton.
pub fn mountain_pass(
    problem: &Problem,
    lambda: f64,
    cfg: &MountainPassConfig,
    warm_start: Option<&RadialField>,
) -> Result<SolutionRecord> {
    cfg.validate()?;
    check_admissible(problem, lambda)?;
    let p = problem.clone().with_positive_part(cfg.force_positive);
    let shift = p.preconditioner_shift(lambda);
    let points = cfg.path_points;

    // A warm start whose ray never reaches negative energy at this λ falls
    // back to the cold endpoint.
    let warm = match warm_start {
        Some(w) if k_norm(w, shift) > 0.0 => {
            let w = if cfg.force_positive && p.is_lambda_family() && w.at_origin() < 0.0 {
                w.scale(-1.0)
            } else {
                w.clone()
            };
            match lay_path(&p, lambda, &w, 2.0, points) {
                Ok(first) => Some((w, first)),
                Err(Error::EndpointNotFound { .. }) => {
                    log::debug!(
                        "mountain pass: warm start has no negative-energy end at λ = {lambda}"
                    );
                    None
                }
                Err(e) => return Err(e),
            }
        }
        _ => None,
    };
    let (dir, first) = match warm {
        Some(start) => start,
        None => {
            let e = find_endpoint(&p, lambda)?;
            let first = lay_path(&p, lambda, &e, 1.0, points)?;
            (e, first)
        }
    };
    let mut peak = dir.scale(first.t);
    let mut peak_energy = first.energy;
    let mut end_ratio = first.t_end / first.t;

    let stop_tol = cfg.grad_tol.max(cfg.newton_handoff);
    let mut iterations = 0;
    let mut monotone = true;
    for it in 0..cfg.max_outer_iters {
        iterations = it + 1;
        if k_norm(&peak, shift) < 1e-10 {
            return Err(Error::CollapsedToZero { iterations });
        }
        let grad = gradient(&p, &peak, lambda);
        let pg = solve_shifted(&grad, shift)?;
        let slope = crate::radial::dot(&grad, &pg).max(0.0);
        let rel = slope.sqrt() / k_norm(&peak, shift);
        log::trace!("mountain pass: iteration {it} level {peak_energy:.10} residual {rel:.3e}");
        if rel <= stop_tol {
            break;
        }

        let mut sigma = cfg.initial_step;
        let mut accepted = None;
        for _ in 0..50 {
            let moved = peak.axpy(-sigma, &pg);
            if moved.is_finite() {
                if let Ok(r) = lay_path(&p, lambda, &moved, end_ratio, points) {
                    if r.energy <= peak_energy - cfg.sufficient_decrease * sigma * slope {
                        accepted = Some((moved, r));
                        break;
                    }
                }
            }
            sigma *= cfg.shrink;
        }
        let Some((moved, r)) = accepted else {
            log::debug!("mountain pass: line search stalled at iteration {iterations}");
            break;
        };
        // Guaranteed by the sufficient-decrease test above.
        debug_assert!(r.energy <= peak_energy);
        if r.energy > peak_energy {
            monotone = false;
        }
        peak = moved.scale(r.t);
        peak_energy = r.energy;
        end_ratio = if (it + 1) % cfg.reparametrize_every == 0 {
            1.0
        } else {
            r.t_end / r.t
        };
    }
    if k_norm(&peak, shift) < 1e-10 {
        return Err(Error::CollapsedToZero { iterations });
    }

    let mut record = SolutionRecord::assess(&p, peak.clone(), lambda, cfg.grad_tol)?;
    let (refined, newton_iterations) =
        newton::newton_refine_counted(&p, &peak, lambda, &NewtonOptions::default())?;
    let candidate = SolutionRecord::assess(&p, refined, lambda, cfg.grad_tol)?;
    // Only keep the Newton iterate if it stayed on the same critical level.
    let same_level = (candidate.level - peak_energy).abs() <= 0.05 * peak_energy.abs() + 1e-12;
    if candidate.grad_residual < record.grad_residual && same_level && candidate.u.is_finite() {
        record = candidate;
        record.newton_iterations = newton_iterations;
    }
    record.iterations = iterations;
    record.descent_monotone = monotone;

    if p.is_lambda_family() && record.u.at_origin() < 0.0 && is_odd(p.nonlinearity()) {
        let flipped = record.u.scale(-1.0);
        let (its, nits, mono) = (record.iterations, record.newton_iterations, monotone);
        record = SolutionRecord::assess(&p, flipped, lambda, cfg.grad_tol)?;
        record.iterations = its;
        record.newton_iterations = nits;
        record.descent_monotone = mono;
    }
    Ok(record)
}

fn is_odd(nl: &Nonlinearity) -> bool {
    !matches!(nl, Nonlinearity::PositivePartPower { .. })
}
