//! The forced problem `-Δu = (u⁺)^p + f` on a ball: mountain-pass geometry
//! constants, forced solves, the positivity threshold in the forcing
//! amplitude, and the `f → 0` limit study.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuation::{fmt_num, write_csv};
use crate::error::{Error, Result};
use crate::functional::{dual_norm, energy, Problem};
use crate::nonlinearity::golden_max;
use crate::radial::{dot, lp_norm, norms, solve_shifted, DomainKind, RadialField, RadialGrid};
use crate::rng;
use crate::solvers::{
    mountain_pass, shooting_ball_ground_state, MountainPassConfig, SolutionRecord,
};

/// Multiplier applied to the measured embedding constant before it enters
/// the closed-form geometry recipe.
pub const SAFETY_FACTOR: f64 = 2.0;

/// Number of random probes in [`measure_sobolev_constant`].
pub const RANDOM_PROBES: usize = 50;

fn check_ball(grid: &RadialGrid) -> Result<()> {
    if grid.kind() != DomainKind::Ball {
        return Err(Error::InvalidProblem(
            "the forced problem lives on a ball grid".into(),
        ));
    }
    Ok(())
}

fn check_exponents(grid: &RadialGrid, p: f64, q: f64) -> Result<()> {
    let n = grid.dim() as f64;
    if !(p > 1.0 && p < grid.critical_exponent()) {
        return Err(Error::InvalidProblem(format!(
            "p = {p} must lie in ]1, {}[",
            grid.critical_exponent()
        )));
    }
    if !(q > n / 2.0) || !q.is_finite() {
        return Err(Error::InvalidProblem(format!(
            "q = {q} must exceed N/2 = {}",
            n / 2.0
        )));
    }
    Ok(())
}

/// `f = α·profile` with `‖profile‖_q = 1`.
#[derive(Debug, Clone)]
pub struct ForcingTerm {
    profile: RadialField,
    amplitude: f64,
    q: f64,
}

impl ForcingTerm {
    /// Normalizes `raw` to unit `L^q` norm.
    pub fn new(raw: &RadialField, q: f64, amplitude: f64) -> Result<Self> {
        let n = raw.grid().dim() as f64;
        if !(q > n / 2.0) || !q.is_finite() {
            return Err(Error::InvalidField(format!(
                "q = {q} must exceed N/2 = {}",
                n / 2.0
            )));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidField(format!(
                "the amplitude must be a nonnegative number, got {amplitude}"
            )));
        }
        let norm = lp_norm(raw, q);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidField(
                "the forcing profile has no finite nonzero L^q norm".into(),
            ));
        }
        Ok(Self {
            profile: raw.scale(1.0 / norm),
            amplitude,
            q,
        })
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        Self::new(&self.profile, self.q, amplitude)
    }

    pub fn profile(&self) -> &RadialField {
        &self.profile
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn field(&self) -> RadialField {
        self.profile.scale(self.amplitude)
    }

    /// True when the profile is negative at some interior node.
    pub fn is_sign_changing(&self) -> bool {
        self.profile.interior_min() < 0.0
    }
}

/// `cos(πr)` on the unit ball: the reference sign-changing profile.
pub fn cosine_profile(grid: &Arc<RadialGrid>) -> RadialField {
    let r0 = grid.radius();
    RadialField::from_fn(grid, |r| (std::f64::consts::PI * r / r0).cos())
}

/// `cos(πr/2R)`: positive inside, zero on the boundary.
pub fn probe_profile(grid: &Arc<RadialGrid>) -> RadialField {
    let r0 = grid.radius();
    RadialField::from_fn(grid, |r| (std::f64::consts::FRAC_PI_2 * r / r0).cos())
}

fn embedding_ratio(u: &RadialField, p: f64, q_dual: f64) -> f64 {
    let grad = norms(u, 0.0).grad_sq.sqrt();
    if !(grad > 0.0) {
        return 0.0;
    }
    let sobolev = lp_norm(u, p + 1.0).powf(p + 1.0) / grad.powf(p + 1.0);
    let dual = lp_norm(u, q_dual) / grad;
    sobolev.max(dual)
}

/// The probe set of [`measure_sobolev_constant`]: the ball ground state,
/// tents of radius `R`, `R/2`, `R/4`, and `RANDOM_PROBES` random sums
/// `Σ_{k≤8} c_k cos((k−½)πr/R)/k` with `c_k` uniform on `[-1, 1)`.
pub fn sobolev_probes(grid: &Arc<RadialGrid>, p: f64, seed: u64) -> Result<Vec<RadialField>> {
    let mut probes = vec![shooting_ball_ground_state(grid.dim(), p, grid)?];
    let r0 = grid.radius();
    for rho in [r0, r0 / 2.0, r0 / 4.0] {
        probes.push(RadialField::from_fn(grid, move |r| {
            (1.0 - r / rho).max(0.0)
        }));
    }
    let mut g = rng::generator(seed);
    for _ in 0..RANDOM_PROBES {
        let c: Vec<f64> = (0..8).map(|_| rng::symmetric(&mut g)).collect();
        probes.push(RadialField::from_fn(grid, |r| {
            c.iter()
                .enumerate()
                .map(|(k, ck)| {
                    let m = k as f64 + 0.5;
                    ck * (m * std::f64::consts::PI * r / r0).cos() / (k as f64 + 1.0)
                })
                .sum()
        }));
    }
    Ok(probes)
}

/// Lower estimate of the embedding constant
/// `max(‖u‖_{p+1}^{p+1}/‖∇u‖^{p+1}, ‖u‖_{q'}/‖∇u‖)` over [`sobolev_probes`].
pub fn measure_sobolev_constant(grid: &Arc<RadialGrid>, p: f64, q: f64, seed: u64) -> Result<f64> {
    check_ball(grid)?;
    check_exponents(grid, p, q)?;
    let q_dual = q / (q - 1.0);
    let probes = sobolev_probes(grid, p, seed)?;
    Ok(probes
        .iter()
        .map(|u| embedding_ratio(u, p, q_dual))
        .fold(0.0, f64::max))
}

/// Mountain-pass geometry of `I_f` on the sphere `‖∇u‖ = a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConstants {
    pub a: f64,
    /// Barrier level `a²/8`.
    pub b: f64,
    /// Largest `‖f‖_q` for which the barrier is guaranteed.
    pub beta: f64,
    /// Measured embedding constant.
    pub c_sobolev: f64,
    /// `SAFETY_FACTOR · c_sobolev`, the constant used in the recipe.
    pub c_used: f64,
}

impl GeometryConstants {
    /// `a = (1/(4C))^{1/(p−1)}`, `b = a²/8`, `β = a/(8C)`.
    pub fn from_constant(c_sobolev: f64, p: f64) -> Result<Self> {
        if !(c_sobolev > 0.0) || !c_sobolev.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "the embedding constant must be positive, got {c_sobolev}"
            )));
        }
        let c = SAFETY_FACTOR * c_sobolev;
        let a = (1.0 / (4.0 * c)).powf(1.0 / (p - 1.0));
        Ok(Self {
            a,
            b: a * a / 8.0,
            beta: a / (8.0 * c),
            c_sobolev,
            c_used: c,
        })
    }

    /// `½a² − C a^{p+1} ≥ ¼a²` and `C β a ≤ a²/8`, with rounding slack.
    pub fn satisfies_recipe(&self, p: f64) -> bool {
        let (a, c) = (self.a, self.c_used);
        let tol = 1e-12 * a * a;
        0.5 * a * a - c * a.powf(p + 1.0) >= 0.25 * a * a - tol
            && c * self.beta * a <= a * a / 8.0 + tol
    }
}

pub fn geometry_constants(
    grid: &Arc<RadialGrid>,
    p: f64,
    q: f64,
    seed: u64,
) -> Result<GeometryConstants> {
    GeometryConstants::from_constant(measure_sobolev_constant(grid, p, q, seed)?, p)
}

/// A forced solve together with the level checks.
#[derive(Debug, Clone)]
pub struct ForcedSolve {
    /// `record.lambda` holds the amplitude `α`.
    pub record: SolutionRecord,
    /// `α > β`: the barrier is not guaranteed.
    pub above_beta: bool,
    /// `c_f ≥ b`, checked only when `α ≤ β`.
    pub barrier_holds: Option<bool>,
    /// `max_{t>0} I_f(t·probe)` for the fixed probe `cos(πr/2R)`.
    pub probe_bound: f64,
    pub level_bound_holds: bool,
}

/// `max_{t>0} I(t·u)` by doubling an upper bracket and golden section.
pub fn ray_maximum(p: &Problem, u: &RadialField, lambda: f64) -> f64 {
    let ray = |t: f64| energy(p, &u.scale(t), lambda);
    let mut hi = 1.0;
    while ray(hi) >= 0.0 && hi < 1e12 {
        hi *= 2.0;
    }
    let m = 200;
    let (k, _) =
        (1..m)
            .map(|j| (j, ray(hi * j as f64 / m as f64)))
            .fold(
                (0, 0.0),
                |best, (j, e)| if e > best.1 { (j, e) } else { best },
            );
    if k == 0 {
        return 0.0;
    }
    let dt = hi / m as f64;
    golden_max(ray, (k - 1) as f64 * dt, (k + 1) as f64 * dt, 1e-12).1
}

pub fn solve_forced(
    grid: &Arc<RadialGrid>,
    p: f64,
    forcing: &ForcingTerm,
    geometry: &GeometryConstants,
    cfg: &MountainPassConfig,
) -> Result<ForcedSolve> {
    check_ball(grid)?;
    check_exponents(grid, p, forcing.q())?;
    let alpha = forcing.amplitude();
    let above_beta = alpha > geometry.beta;
    if above_beta {
        log::warn!(
            "forcing amplitude {alpha} exceeds β = {}; the barrier is not guaranteed",
            geometry.beta
        );
    }
    let problem = Problem::forced(grid, p, forcing.field())?;
    let mut record = mountain_pass(&problem, 0.0, cfg, None)?;
    record.lambda = alpha;
    let probe_bound = ray_maximum(&problem, &probe_profile(grid), 0.0);
    let slack = 1e-9 * probe_bound.abs().max(1.0);
    Ok(ForcedSolve {
        barrier_holds: (!above_beta).then_some(record.level >= geometry.b),
        level_bound_holds: record.level <= probe_bound + slack,
        probe_bound,
        above_beta,
        record,
    })
}

/// Search parameters for [`positivity_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Upper end of the search, in units of `β`.
    pub alpha_max_factor: f64,
    /// Final bracket width, in units of `β`.
    pub width_factor: f64,
    /// Uniform scan points in `]0, α_max]` before bisection.
    pub scan_points: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            alpha_max_factor: 4.0,
            width_factor: 1e-3,
            scan_points: 8,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_max_factor > 0.0) || !(self.width_factor > 0.0) || self.scan_points == 0 {
            return Err(Error::Config(
                "threshold: alpha_max_factor and width_factor must be positive, scan_points ≥ 1"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// One evaluation of the positivity predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProbe {
    pub alpha: f64,
    pub converged: bool,
    pub level: Option<f64>,
    pub min_u: Option<f64>,
    pub positive: bool,
}

impl ThresholdProbe {
    pub fn accepted(&self) -> bool {
        self.converged && self.positive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    /// Largest amplitude with a verified positive solution below the first
    /// verified nonpositive one; `None` for a degenerate run.
    pub alpha_hat: Option<f64>,
    /// Smallest verified nonpositive amplitude above `alpha_hat`.
    pub alpha_fail: Option<f64>,
    pub alpha_max: f64,
    pub beta: f64,
    /// Every amplitude up to `α_max` gave a positive solution.
    pub degenerate: bool,
    /// Amplitudes accepted after an earlier rejection.
    pub non_monotone: Vec<f64>,
    pub probes: Vec<ThresholdProbe>,
}

fn positivity_probe(
    grid: &Arc<RadialGrid>,
    p: f64,
    forcing: &ForcingTerm,
    geometry: &GeometryConstants,
    cfg: &MountainPassConfig,
    alpha: f64,
) -> Result<ThresholdProbe> {
    let f = forcing.with_amplitude(alpha)?;
    Ok(match solve_forced(grid, p, &f, geometry, cfg) {
        Ok(s) => ThresholdProbe {
            alpha,
            converged: s.record.converged,
            level: Some(s.record.level),
            min_u: Some(s.record.u.interior_min()),
            positive: s.record.positive,
        },
        Err(e) => {
            log::info!("threshold probe at α = {alpha} failed: {e}");
            ThresholdProbe {
                alpha,
                converged: false,
                level: None,
                min_u: None,
                positive: false,
            }
        }
    })
}

/// Largest forcing amplitude on `[0, α_max]` whose mountain-pass solution
/// converges and is positive at every interior node. A uniform scan locates
/// the first rejected amplitude (later acceptances are logged as
/// non-monotone), then bisection narrows the bracket to `width_factor·β`.
pub fn positivity_threshold(
    grid: &Arc<RadialGrid>,
    p: f64,
    profile: &ForcingTerm,
    geometry: &GeometryConstants,
    cfg: &MountainPassConfig,
    tcfg: &ThresholdConfig,
) -> Result<ThresholdReport> {
    tcfg.validate()?;
    if !profile.is_sign_changing() {
        log::warn!("threshold search with a nonnegative profile: expecting a degenerate run");
    }
    let beta = geometry.beta;
    let alpha_max = tcfg.alpha_max_factor * beta;
    let probe = |alpha: f64| positivity_probe(grid, p, profile, geometry, cfg, alpha);

    let zero = probe(0.0)?;
    if !zero.accepted() {
        return Err(Error::NoPositiveSolutionAtZero);
    }
    let mut probes = vec![zero];
    let m = tcfg.scan_points;
    let scan: Vec<ThresholdProbe> = (1..=m)
        .map(|j| probe(alpha_max * j as f64 / m as f64))
        .collect::<Result<_>>()?;
    probes.extend(scan.iter().cloned());

    let Some(first_fail) = scan.iter().position(|s| !s.accepted()) else {
        return Ok(ThresholdReport {
            alpha_hat: None,
            alpha_fail: None,
            alpha_max,
            beta,
            degenerate: true,
            non_monotone: Vec::new(),
            probes,
        });
    };
    let non_monotone: Vec<f64> = scan[first_fail..]
        .iter()
        .filter(|s| s.accepted())
        .map(|s| s.alpha)
        .collect();
    for a in &non_monotone {
        log::warn!("positivity predicate is non-monotone: accepted at α = {a} above a rejection");
    }
    let mut lo = if first_fail == 0 {
        0.0
    } else {
        scan[first_fail - 1].alpha
    };
    let mut hi = scan[first_fail].alpha;
    while hi - lo > tcfg.width_factor * beta {
        let mid = 0.5 * (lo + hi);
        let s = probe(mid)?;
        if s.accepted() {
            lo = mid;
        } else {
            hi = mid;
        }
        probes.push(s);
    }
    Ok(ThresholdReport {
        alpha_hat: Some(lo),
        alpha_fail: Some(hi),
        alpha_max,
        beta,
        degenerate: false,
        non_monotone,
        probes,
    })
}

pub const THRESHOLD_COLUMNS: [&str; 5] = ["alpha", "converged", "level", "min_u", "positive"];

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn write_threshold_csv(report: &ThresholdReport, path: &Path) -> Result<()> {
    write_csv(
        path,
        &THRESHOLD_COLUMNS,
        report.probes.iter().map(|s| {
            vec![
                fmt_num(s.alpha),
                s.converged.to_string(),
                opt(s.level),
                opt(s.min_u),
                s.positive.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub alpha: f64,
    pub sup_dist: f64,
    /// Largest difference of forward nodal derivatives.
    pub c1_dist: f64,
    pub level: f64,
    pub min_u: f64,
    pub converged: bool,
    pub positive: bool,
    /// `I(u_n)` for the unforced functional.
    pub unforced_level: f64,
    /// `∫ f_n u_n = I(u_n) − I_{f_n}(u_n)`.
    pub forcing_pairing: f64,
    /// `‖f_n‖` in the dual of `H¹_0`, equal to `‖I'(u_n) − I'_{f_n}(u_n)‖`.
    pub forcing_dual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitStudy {
    pub base_level: f64,
    pub base_sup: f64,
    pub base_min: f64,
    pub rows: Vec<LimitRow>,
    /// `sup_dist` is strictly decreasing along the amplitude list.
    pub sup_monotone: bool,
    /// `max sup_dist/α`, the measured continuity constant.
    pub continuity_constant: f64,
}

fn c1_distance(u: &RadialField, v: &RadialField) -> f64 {
    let h = u.grid().spacing();
    let d = u.axpy(-1.0, v);
    d.values()
        .windows(2)
        .map(|w| ((w[1] - w[0]) / h).abs())
        .fold(0.0, f64::max)
}

/// Solves the forced problem at each amplitude (in parallel) and measures the
/// distance to the unforced ground state.
pub fn limit_study(
    grid: &Arc<RadialGrid>,
    p: f64,
    profile: &ForcingTerm,
    geometry: &GeometryConstants,
    amplitudes: &[f64],
    cfg: &MountainPassConfig,
) -> Result<LimitStudy> {
    if amplitudes.is_empty()
        || amplitudes.windows(2).any(|w| !(w[1] < w[0]))
        || amplitudes.iter().any(|a| !(*a > 0.0))
    {
        return Err(Error::Config(
            "limit study amplitudes must be positive and strictly decreasing".into(),
        ));
    }
    let base = solve_forced(grid, p, &profile.with_amplitude(0.0)?, geometry, cfg)?;
    let u0 = &base.record.u;
    let unforced = Problem::forced(grid, p, RadialField::zeros(grid))?;
    let rows: Vec<LimitRow> = amplitudes
        .par_iter()
        .map(|&alpha| -> Result<LimitRow> {
            let f = profile.with_amplitude(alpha)?;
            let s = solve_forced(grid, p, &f, geometry, cfg)?;
            let u = &s.record.u;
            Ok(LimitRow {
                alpha,
                sup_dist: u.axpy(-1.0, u0).sup_norm(),
                c1_dist: c1_distance(u, u0),
                level: s.record.level,
                min_u: u.interior_min(),
                converged: s.record.converged,
                positive: s.record.positive,
                unforced_level: energy(&unforced, u, 0.0),
                forcing_pairing: dot(&f.field(), u),
                forcing_dual_norm: dual_norm(&f.field(), 0.0)?,
            })
        })
        .collect::<Result<_>>()?;
    let sup_monotone = rows.windows(2).all(|w| w[1].sup_dist < w[0].sup_dist);
    let continuity_constant = rows
        .iter()
        .map(|r| r.sup_dist / r.alpha)
        .fold(0.0, f64::max);
    Ok(LimitStudy {
        base_level: base.record.level,
        base_sup: u0.sup_norm(),
        base_min: u0.interior_min(),
        rows,
        sup_monotone,
        continuity_constant,
    })
}

pub const LIMIT_COLUMNS: [&str; 5] = ["alpha", "sup_dist", "c1_dist", "level", "min_u"];

pub fn write_limit_csv(study: &LimitStudy, path: &Path) -> Result<()> {
    write_csv(
        path,
        &LIMIT_COLUMNS,
        study.rows.iter().map(|r| {
            vec![
                fmt_num(r.alpha),
                fmt_num(r.sup_dist),
                fmt_num(r.c1_dist),
                fmt_num(r.level),
                fmt_num(r.min_u),
            ]
        }),
    )
}

/// `(½ − 1/(p+1))‖u‖² ≤ c_f + 1 + ‖u‖ + (p/(p+1))‖f‖_*‖u‖ + slack` with
/// `‖u‖ = ‖∇u‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsBound {
    pub lhs: f64,
    pub rhs: f64,
    /// Probe estimate of `‖f‖_{H⁻¹}`.
    pub f_dual: f64,
    pub holds: bool,
}

/// `max ∫f v / ‖∇v‖` over the probes `(-Δ_h)⁻¹f` (the exact maximizer on the
/// grid), `u`, and `cos(πr/2R)`.
pub fn forcing_dual_estimate(f: &RadialField, u: &RadialField) -> Result<f64> {
    let mut probes = vec![u.clone(), probe_profile(f.grid())];
    if f.sup_norm() > 0.0 {
        probes.push(solve_shifted(f, 0.0)?);
    }
    Ok(probes
        .iter()
        .map(|v| {
            let g = norms(v, 0.0).grad_sq.sqrt();
            if g > 0.0 {
                dot(f, v).abs() / g
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max))
}

pub fn ps_bound_check(record: &SolutionRecord, forcing: &RadialField, p: f64) -> Result<PsBound> {
    let norm = norms(&record.u, 0.0).grad_sq.sqrt();
    let f_dual = forcing_dual_estimate(forcing, &record.u)?;
    let lhs = (0.5 - 1.0 / (p + 1.0)) * norm * norm;
    let slack = 1e-6 * record.level.abs().max(1.0);
    let rhs = record.level + 1.0 + norm + p / (p + 1.0) * f_dual * norm + slack;
    Ok(PsBound {
        lhs,
        rhs,
        f_dual,
        holds: lhs <= rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::make_grid;

    #[test]
    fn forcing_is_normalized() {
        let g = make_grid(3, 1.0, 200, DomainKind::Ball).unwrap();
        let f = ForcingTerm::new(&cosine_profile(&g).scale(7.0), 2.0, 0.3).unwrap();
        assert!((lp_norm(f.profile(), 2.0) - 1.0).abs() < 1e-10);
        assert!((lp_norm(&f.field(), 2.0) - 0.3).abs() < 1e-10);
        assert!(f.is_sign_changing());
        assert!(ForcingTerm::new(&cosine_profile(&g), 1.5, 0.1).is_err());
        assert!(ForcingTerm::new(&RadialField::zeros(&g), 2.0, 0.1).is_err());
        assert!(ForcingTerm::new(&cosine_profile(&g), 2.0, -1.0).is_err());
    }

    #[test]
    fn recipe_holds_by_construction() {
        for c in [0.01, 0.3, 2.0] {
            let geo = GeometryConstants::from_constant(c, 3.0).unwrap();
            assert!(geo.satisfies_recipe(3.0));
            let a = geo.a;
            assert!((0.5 * a * a - geo.c_used * a.powi(4) - 0.25 * a * a).abs() < 1e-12 * a * a);
            let doubled = GeometryConstants::from_constant(2.0 * c, 3.0).unwrap();
            assert!(doubled.a < geo.a && doubled.beta < geo.beta);
        }
        assert!(GeometryConstants::from_constant(0.0, 3.0).is_err());
    }

    #[test]
    fn c1_distance_of_a_line() {
        let g = make_grid(3, 1.0, 100, DomainKind::Ball).unwrap();
        let u = RadialField::from_fn(&g, |r| 1.0 - r);
        let z = RadialField::zeros(&g);
        assert!((c1_distance(&u, &z) - 1.0).abs() < 1e-12);
    }
}
