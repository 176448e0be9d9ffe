//! The acceptance suite: twelve property- and oracle-based criteria run on a
//! [`RunConfig`]. Each criterion yields one PASS/FAIL line with details.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use crate::config::{ModeSpec, PotentialSpec, RunConfig};
use crate::continuation::{
    diagnose, fmt_num, lambda_range, ps_transfer_check, scaling_check, sweep, write_branch_csv,
    write_csv, write_profile_csv, Branch,
};
use crate::error::{Error, Result};
use crate::functional::{energy, gradient, transfer_gradient, transfer_level, Problem};
use crate::nonhomogeneous::{
    geometry_constants, limit_study, positivity_threshold, ps_bound_check, solve_forced,
    write_limit_csv, write_threshold_csv, ForcingTerm, GeometryConstants, LimitStudy,
    ThresholdReport,
};
use crate::nonlinearity::{check_hypotheses, lambda_star, H4Status, Nonlinearity};
use crate::radial::{dot, make_grid, DomainKind, RadialField, RadialGrid};
use crate::rng;
use crate::solvers::{mountain_pass, shooting_ground_state, MountainPassConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub summary: &'static str,
}

pub const CRITERIA: [Criterion; 12] = [
    Criterion {
        id: 1,
        name: "oracle-equivalence",
        summary: "mountain pass vs shooting: sup distance ≤ 1e-3·‖u‖∞, level ≤ 1e-3·m",
    },
    Criterion {
        id: 2,
        name: "critical-point-identities",
        summary:
            "Pohozaev, energy-identity and Nehari residuals ≤ 1e-3; decreasing under n/4, n/2, n",
    },
    Criterion {
        id: 3,
        name: "scaling-law",
        summary: "m_λ/m_1 = λ^θ within 1%",
    },
    Criterion {
        id: 4,
        name: "monotonicity-continuity",
        summary: "levels nondecreasing; halving the λ step at least halves both jumps",
    },
    Criterion {
        id: 5,
        name: "transfer",
        summary: "transfer bounds at λ0 on the sweep; transfer formulas exact to 1e-12",
    },
    Criterion {
        id: 6,
        name: "lambda-star",
        summary: "λ*(saturating) = 1 within 1e-6, λ = 1.2 refused, λ*(cubic) = ∞",
    },
    Criterion {
        id: 7,
        name: "hypotheses",
        summary: "cubic satisfies (H1)-(H4) with μ = 4; saturating fails (H4); p = 5 supercritical",
    },
    Criterion {
        id: 8,
        name: "forced-barrier",
        summary: "α ≤ β: c_f ≥ b, c_f ≤ max_t I_f(t·probe), a-priori bound holds",
    },
    Criterion {
        id: 9,
        name: "positivity-threshold",
        summary: "α̂ ≥ 1e-3·β; accepted probes strictly positive",
    },
    Criterion {
        id: 10,
        name: "limit-study",
        summary: "distance to u₀ decreasing, ≤ 1e-2·‖u₀‖∞ at β/8; ∫f·u ∝ α within 2×",
    },
    Criterion {
        id: 11,
        name: "gradient-consistency",
        summary: "central differences match ⟨I'(u), v⟩ at second order in every mode",
    },
    Criterion {
        id: 12,
        name: "determinism",
        summary: "regenerated CSV outputs are byte-identical",
    },
];

#[derive(Debug, Clone)]
pub struct Outcome {
    pub criterion: Criterion,
    pub passed: bool,
    pub details: Vec<String>,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:>2} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion.id,
            self.criterion.name,
            self.seconds
        )?;
        for d in &self.details {
            write!(f, "\n       {d}")?;
        }
        Ok(())
    }
}

// Collects check results for one criterion.
struct Checks {
    passed: bool,
    details: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self {
            passed: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.passed &= ok;
        self.details
            .push(format!("[{}] {detail}", if ok { "ok" } else { "x" }));
    }

    fn note(&mut self, detail: String) {
        self.details.push(detail);
    }
}

// Ball grid, measured geometry and the unit-norm forcing profile.
type ForcedSetup = (Arc<RadialGrid>, GeometryConstants, ForcingTerm);

/// Shared, lazily computed inputs of the criteria.
pub struct Suite {
    cfg: RunConfig,
    out: PathBuf,
    grid: OnceLock<std::result::Result<Arc<RadialGrid>, String>>,
    branch: OnceLock<std::result::Result<Branch, String>>,
    forced: OnceLock<std::result::Result<ForcedSetup, String>>,
}

fn fail<T>(e: impl fmt::Display) -> std::result::Result<T, String> {
    Err(e.to_string())
}

impl Suite {
    pub fn new(cfg: RunConfig, out: &Path) -> Self {
        Self {
            cfg,
            out: out.to_path_buf(),
            grid: OnceLock::new(),
            branch: OnceLock::new(),
            forced: OnceLock::new(),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    fn solver(&self) -> &MountainPassConfig {
        &self.cfg.solver
    }

    fn reference_grid(&self) -> std::result::Result<&Arc<RadialGrid>, String> {
        self.grid
            .get_or_init(|| self.cfg.grid().map_err(|e| e.to_string()))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn reference_problem(&self) -> std::result::Result<Problem, String> {
        let g = self.reference_grid()?;
        Ok(Problem::autonomous(g, self.reference_nonlinearity()))
    }

    // The acceptance reference is autonomous whatever the configured mode.
    fn reference_nonlinearity(&self) -> Nonlinearity {
        match self.cfg.problem.mode {
            ModeSpec::Forced => Nonlinearity::pure_power(3.0).expect("valid"),
            _ => self.cfg.problem.nonlinearity.clone(),
        }
    }

    fn reference_branch(&self) -> std::result::Result<&Branch, String> {
        self.branch
            .get_or_init(|| {
                let p = self.reference_problem()?;
                let lambdas = self.cfg.sweep.lambda_grid().or_else(fail)?;
                sweep(&p, &lambdas, self.solver(), self.cfg.sweep.warm).or_else(fail)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn forced_setup(&self) -> std::result::Result<&ForcedSetup, String> {
        self.forced
            .get_or_init(|| {
                let fs = &self.cfg.forced;
                let g = fs.grid(self.cfg.problem.dim).or_else(fail)?;
                let geo = geometry_constants(&g, fs.p, fs.q, self.cfg.seed).or_else(fail)?;
                let f = fs.forcing(&g).or_else(fail)?;
                Ok((g, geo, f))
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn out_file(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }

    /// Runs one criterion by id; errors become failures with the message.
    pub fn run(&self, id: usize) -> Outcome {
        let criterion = *CRITERIA
            .iter()
            .find(|c| c.id == id)
            .unwrap_or_else(|| panic!("no acceptance criterion {id}"));
        let start = Instant::now();
        let mut checks = Checks::new();
        let res = match id {
            1 => self.oracle_equivalence(&mut checks),
            2 => self.identities(&mut checks),
            3 => self.scaling(&mut checks),
            4 => self.monotonicity(&mut checks),
            5 => self.transfer(&mut checks),
            6 => self.lambda_star(&mut checks),
            7 => self.hypotheses(&mut checks),
            8 => self.forced_barrier(&mut checks),
            9 => self.threshold(&mut checks),
            10 => self.limit(&mut checks),
            11 => self.gradient_consistency(&mut checks),
            12 => self.determinism(&mut checks),
            _ => unreachable!(),
        };
        if let Err(e) = res {
            checks.check(false, format!("error: {e}"));
        }
        Outcome {
            criterion,
            passed: checks.passed,
            details: checks.details,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    pub fn run_all(&self) -> Vec<Outcome> {
        CRITERIA.iter().map(|c| self.run(c.id)).collect()
    }

    fn oracle_equivalence(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let p = self.reference_problem()?;
        let g = self.reference_grid()?;
        for &lambda in &self.cfg.acceptance.oracle_lambdas {
            let rec = mountain_pass(&p, lambda, self.solver(), None).or_else(fail)?;
            let oracle =
                shooting_ground_state(g.dim(), lambda, p.nonlinearity(), g).or_else(fail)?;
            let m = energy(&p, &oracle, lambda);
            let sup = rec.u.axpy(-1.0, &oracle).sup_norm();
            let scale = oracle.sup_norm();
            c.check(
                rec.converged && rec.positive,
                format!(
                    "λ = {lambda}: converged {} positive {}",
                    rec.converged, rec.positive
                ),
            );
            c.check(
                sup <= 1e-3 * scale,
                format!("λ = {lambda}: sup distance {sup:.3e} vs 1e-3·{scale:.4}"),
            );
            let dl = (rec.level - m).abs();
            c.check(
                dl <= 1e-3 * m,
                format!(
                    "λ = {lambda}: level {:.8} vs shooting {m:.8} (diff {dl:.2e})",
                    rec.level
                ),
            );
            let path = self
                .out_file(&format!("oracle_profile_lambda_{}.csv", fmt_num(lambda)))
                .or_else(fail)?;
            write_profile_csv(&rec.u, &path).or_else(fail)?;
        }
        Ok(())
    }

    fn identities(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let p = self.reference_problem()?;
        for &lambda in &self.cfg.acceptance.oracle_lambdas {
            let rec = mountain_pass(&p, lambda, self.solver(), None).or_else(fail)?;
            let poho = rec.pohozaev_residual.unwrap_or(f64::NAN).abs();
            let ei = rec.energy_identity_residual.unwrap_or(f64::NAN);
            let neh = rec.nehari_residual.abs();
            c.check(poho <= 1e-3, format!("λ = {lambda}: Pohozaev {poho:.2e}"));
            c.check(
                ei <= 1e-3,
                format!("λ = {lambda}: energy identity {ei:.2e} (relative to m_λ)"),
            );
            c.check(
                neh <= 1e-3,
                format!("λ = {lambda}: Nehari {neh:.2e} (relative to ‖u‖²_λ)"),
            );
        }
        let pr = &self.cfg.problem;
        let mut ladder = Vec::new();
        for n in [pr.interior / 4, pr.interior / 2, pr.interior] {
            let g = make_grid(pr.dim, pr.radius, n, pr.domain).or_else(fail)?;
            let q = Problem::autonomous(&g, self.reference_nonlinearity());
            let rec = mountain_pass(&q, 1.0, self.solver(), None).or_else(fail)?;
            let poho = rec.pohozaev_residual.unwrap_or(f64::NAN).abs();
            let ei = rec.energy_identity_residual.unwrap_or(f64::NAN);
            c.note(format!(
                "n = {n}: Pohozaev {poho:.3e}, energy identity {ei:.3e}, Nehari {:.1e}",
                rec.nehari_residual.abs()
            ));
            ladder.push((poho, ei));
        }
        let decreasing = ladder
            .windows(2)
            .all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
        c.check(
            decreasing,
            "refinement ladder at λ = 1: Pohozaev and energy-identity residuals decrease".into(),
        );
        Ok(())
    }

    fn scaling(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let p = self.reference_problem()?;
        let mut lambdas = self.cfg.acceptance.scaling_lambdas.clone();
        lambdas.push(1.0);
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        let b = sweep(&p, &lambdas, self.solver(), false).or_else(fail)?;
        for gap in &b.gaps {
            c.check(false, format!("gap at λ = {}: {}", gap.lambda, gap.reason));
        }
        let r = scaling_check(&b, 1.0).or_else(fail)?;
        c.note(format!(
            "θ = {} for p = {}, N = {}",
            r.theta,
            r.exponent,
            p.grid().dim()
        ));
        for e in &r.entries {
            c.check(
                e.relative_deviation <= 1e-2,
                format!(
                    "λ = {}: m_λ/m_1 = {:.6} vs λ^θ = {:.6} (deviation {:.2e})",
                    e.lambda, e.ratio, e.predicted, e.relative_deviation
                ),
            );
        }
        Ok(())
    }

    fn monotonicity(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let b = self.reference_branch()?;
        let s = &self.cfg.sweep;
        for gap in &b.gaps {
            c.check(false, format!("gap at λ = {}: {}", gap.lambda, gap.reason));
        }
        let d = diagnose(b);
        c.check(
            d.monotone,
            format!(
                "{} records, levels nondecreasing (S = [{:.6}, {:.6}])",
                b.records.len(),
                d.levels_interval.0,
                d.levels_interval.1
            ),
        );
        let half =
            lambda_range(s.lambda_start, s.lambda_stop, s.lambda_step / 2.0).or_else(fail)?;
        let fine_branch = sweep(&b.problem, &half, self.solver(), s.warm).or_else(fail)?;
        let fine = diagnose(&fine_branch);
        c.check(
            fine.monotone,
            format!(
                "half step: {} records, levels nondecreasing",
                fine_branch.records.len()
            ),
        );
        let lr = fine.max_level_jump / d.max_level_jump;
        let fr = fine.max_field_jump / d.max_field_jump;
        c.check(
            lr <= 0.5,
            format!(
                "max level jump {:.6e} → {:.6e} (ratio {lr:.4})",
                d.max_level_jump, fine.max_level_jump
            ),
        );
        c.check(
            fr <= 0.5,
            format!(
                "max field jump {:.6e} → {:.6e} (ratio {fr:.4})",
                d.max_field_jump, fine.max_field_jump
            ),
        );
        write_branch_csv(b, &self.out_file("branch.csv").or_else(fail)?).or_else(fail)?;
        write_branch_csv(
            &fine_branch,
            &self.out_file("branch_half_step.csv").or_else(fail)?,
        )
        .or_else(fail)?;
        Ok(())
    }

    fn transfer(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let b = self.reference_branch()?;
        let lambda0 = self.cfg.sweep.lambda0;
        let r = ps_transfer_check(b, lambda0).or_else(fail)?;
        let violations = r.entries.iter().filter(|e| !e.holds).count();
        c.check(
            violations == 0,
            format!(
                "λ0 = {lambda0}: {} records, {violations} bound violations (slack {:.1e})",
                r.entries.len(),
                r.slack
            ),
        );
        if let Some(k) = r.lipschitz_constant {
            c.note(format!("fitted residual ≤ C·|λ_n − λ0| with C = {k:.4}"));
        }
        let p = &b.problem;
        let (mut worst_level, mut worst_grad) = (0.0_f64, 0.0_f64);
        for rec in &b.records {
            let via = transfer_level(p, &rec.u, rec.lambda, lambda0).or_else(fail)?;
            let direct = energy(p, &rec.u, lambda0);
            worst_level =
                worst_level.max((via - direct).abs() / direct.abs().max(f64::MIN_POSITIVE));
            let tg = transfer_gradient(p, &rec.u, rec.lambda, lambda0).or_else(fail)?;
            let dg = gradient(p, &rec.u, lambda0);
            let scale = dg.sup_norm().max(rec.u.sup_norm() * lambda0);
            worst_grad = worst_grad.max(tg.axpy(-1.0, &dg).sup_norm() / scale);
        }
        c.check(
            worst_level <= 1e-12,
            format!("transfer_level vs direct: max relative difference {worst_level:.2e}"),
        );
        c.check(
            worst_grad <= 1e-12,
            format!("transfer_gradient vs direct: max relative difference {worst_grad:.2e}"),
        );
        Ok(())
    }

    fn lambda_star(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let sat = lambda_star(&Nonlinearity::SaturatingCubic).or_else(fail)?;
        c.check(
            (sat.value - 1.0).abs() <= 1e-6,
            format!("λ*(s³/(1+s²)) = {}", sat.value),
        );
        let g = make_grid(3, 20.0, 400, DomainKind::TruncatedWholeSpace).or_else(fail)?;
        let p = Problem::autonomous(&g, Nonlinearity::SaturatingCubic);
        let refused = matches!(
            mountain_pass(&p, 1.2, self.solver(), None),
            Err(Error::LambdaOutOfRange { .. })
        );
        c.check(refused, "λ = 1.2 refused for the saturating cubic".into());
        let cubic = lambda_star(&Nonlinearity::pure_power(3.0).or_else(fail)?).or_else(fail)?;
        c.check(cubic.is_infinite(), format!("λ*(s³) = {}", cubic.value));
        Ok(())
    }

    fn hypotheses(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let cubic = check_hypotheses(&Nonlinearity::pure_power(3.0).or_else(fail)?, 3);
        let mu4 = matches!(cubic.h4, H4Status::Holds { mu } if mu == 4.0);
        c.check(
            cubic.h1 && cubic.h2 && cubic.h3 && mu4,
            format!("s³, N = 3: {cubic:?}"),
        );
        let sat = check_hypotheses(&Nonlinearity::SaturatingCubic, 3);
        c.check(
            sat.h4 == H4Status::Fails,
            format!("s³/(1+s²): (H4) {:?}", sat.h4),
        );
        let quintic = check_hypotheses(&Nonlinearity::pure_power(5.0).or_else(fail)?, 3);
        c.check(
            !quintic.subcritical,
            format!("s⁵, N = 3: subcritical = {}", quintic.subcritical),
        );
        Ok(())
    }

    fn forced_barrier(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let (g, geo, f) = self.forced_setup()?;
        let fs = &self.cfg.forced;
        c.note(format!(
            "C = {:.6} (used {:.6}), a = {:.6}, b = {:.6}, β = {:.6}",
            geo.c_sobolev, geo.c_used, geo.a, geo.b, geo.beta
        ));
        for k in 0..=4 {
            let alpha = geo.beta * k as f64 / 4.0;
            let forcing = f.with_amplitude(alpha).or_else(fail)?;
            let s = solve_forced(g, fs.p, &forcing, geo, self.solver()).or_else(fail)?;
            let ps = ps_bound_check(&s.record, &forcing.field(), fs.p).or_else(fail)?;
            c.check(
                s.record.converged && s.barrier_holds == Some(true),
                format!("α = {alpha:.5}: c_f = {:.6} ≥ b", s.record.level),
            );
            c.check(
                s.level_bound_holds,
                format!(
                    "α = {alpha:.5}: c_f ≤ max_t I_f(t·probe) = {:.6}",
                    s.probe_bound
                ),
            );
            c.check(
                ps.holds,
                format!(
                    "α = {alpha:.5}: a-priori bound {:.4} ≤ {:.4}",
                    ps.lhs, ps.rhs
                ),
            );
        }
        Ok(())
    }

    fn threshold_report(&self) -> std::result::Result<ThresholdReport, String> {
        let (g, geo, f) = self.forced_setup()?;
        positivity_threshold(
            g,
            self.cfg.forced.p,
            f,
            geo,
            self.solver(),
            &self.cfg.threshold,
        )
        .or_else(fail)
    }

    fn threshold(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let (_, geo, _) = self.forced_setup()?;
        let r = self.threshold_report()?;
        write_threshold_csv(&r, &self.out_file("threshold.csv").or_else(fail)?).or_else(fail)?;
        match r.alpha_hat {
            Some(a) => c.check(
                a >= 1e-3 * geo.beta,
                format!(
                    "α̂ = {a:.6} = {:.3}·β (first failure {:.6})",
                    a / geo.beta,
                    r.alpha_fail.unwrap_or(f64::NAN)
                ),
            ),
            None => c.check(
                false,
                format!("degenerate run: positive up to α_max = {:.4}", r.alpha_max),
            ),
        }
        let bad = r
            .probes
            .iter()
            .filter(|p| p.accepted() && !(p.min_u.unwrap_or(f64::NAN) > 0.0))
            .count();
        c.check(
            bad == 0,
            format!(
                "{} probes, {bad} accepted without strictly positive interior",
                r.probes.len()
            ),
        );
        if !r.non_monotone.is_empty() {
            c.note(format!(
                "non-monotone acceptances at α = {:?}",
                r.non_monotone
            ));
        }
        Ok(())
    }

    fn limit_run(&self) -> std::result::Result<LimitStudy, String> {
        let (g, geo, f) = self.forced_setup()?;
        let amps: Vec<f64> = self
            .cfg
            .forced
            .amplitude_factors
            .iter()
            .map(|k| k * geo.beta)
            .collect();
        limit_study(g, self.cfg.forced.p, f, geo, &amps, self.solver()).or_else(fail)
    }

    fn limit(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let s = self.limit_run()?;
        write_limit_csv(&s, &self.out_file("limit.csv").or_else(fail)?).or_else(fail)?;
        let dists: Vec<String> = s
            .rows
            .iter()
            .map(|r| format!("{:.3e}", r.sup_dist))
            .collect();
        c.check(
            s.sup_monotone,
            format!("sup distances {}", dists.join(", ")),
        );
        let last = s.rows.last().map_or(f64::NAN, |r| r.sup_dist);
        c.check(
            last <= 1e-2 * s.base_sup,
            format!("smallest amplitude: {last:.3e} ≤ 1e-2·{:.4}", s.base_sup),
        );
        for w in s.rows.windows(2) {
            let ratio = w[0].forcing_pairing / w[1].forcing_pairing;
            let expected = w[0].alpha / w[1].alpha;
            c.check(
                ratio >= expected / 2.0 && ratio <= 2.0 * expected,
                format!("∫f·u ratio {ratio:.4} for amplitude ratio {expected:.4}"),
            );
        }
        c.note(format!(
            "continuity constant K = {:.4}",
            s.continuity_constant
        ));
        Ok(())
    }

    fn gradient_consistency(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let pr = &self.cfg.problem;
        let g = self.reference_grid()?;
        let potential = match (&pr.mode, &pr.potential) {
            (ModeSpec::Weighted, spec) => spec.clone(),
            _ => PotentialSpec::Gaussian {
                base: 1.0,
                amplitude: 1.0,
                width: 2.0,
            },
        };
        let (bg, geo, f) = self.forced_setup()?;
        let cases = [
            (
                "autonomous",
                Problem::autonomous(g, self.reference_nonlinearity()),
                1.0,
            ),
            (
                "weighted",
                Problem::weighted(
                    g,
                    self.reference_nonlinearity(),
                    potential.build().or_else(fail)?,
                )
                .or_else(fail)?,
                1.0,
            ),
            (
                "forced",
                Problem::forced(
                    bg,
                    self.cfg.forced.p,
                    f.with_amplitude(geo.beta).or_else(fail)?.field(),
                )
                .or_else(fail)?,
                0.0,
            ),
        ];
        let mut gen = rng::generator(self.cfg.seed);
        for (name, p, lambda) in &cases {
            let (worst_order, worst_rel) =
                gradient_fd_check(p, *lambda, self.cfg.acceptance.gradient_pairs, &mut gen);
            c.check(
                worst_order >= 1.8 && worst_rel <= 1e-4,
                format!(
                    "{name}: {} pairs, min observed order {worst_order:.3}, max relative error {worst_rel:.2e}",
                    self.cfg.acceptance.gradient_pairs
                ),
            );
        }
        Ok(())
    }

    fn determinism(&self, c: &mut Checks) -> std::result::Result<(), String> {
        let a = self.out.join("determinism").join("run_a");
        let b = self.out.join("determinism").join("run_b");
        let fa = write_artifacts(&self.cfg, &a).or_else(fail)?;
        let fb = write_artifacts(&self.cfg, &b).or_else(fail)?;
        c.check(
            fa.len() == fb.len() && !fa.is_empty(),
            format!("{} CSV files per run", fa.len()),
        );
        for (x, y) in fa.iter().zip(&fb) {
            let same = fs::read(x).or_else(fail)? == fs::read(y).or_else(fail)?;
            c.check(
                same,
                format!("{}", x.file_name().unwrap_or_default().to_string_lossy()),
            );
        }
        Ok(())
    }
}

// Smooth random field Σ_{k≤8} c_k cos((k−½)πr/R)/k.
fn random_field(grid: &Arc<RadialGrid>, gen: &mut rng::SplitMix64) -> RadialField {
    let c: Vec<f64> = (0..8).map(|_| rng::symmetric(gen)).collect();
    let r0 = grid.radius();
    RadialField::from_fn(grid, |r| {
        c.iter()
            .enumerate()
            .map(|(k, ck)| {
                ck * ((k as f64 + 0.5) * std::f64::consts::PI * r / r0).cos() / (k as f64 + 1.0)
            })
            .sum()
    })
}

/// Central differences `(I(u+εv) − I(u−εv))/2ε` against `⟨I'(u), v⟩` at
/// `ε = 1e-2, 5e-3` on random smooth pairs. Returns the smallest observed
/// order and the largest relative error at the finer step; pairs whose
/// error at the coarse step is already at rounding level count as order 2.
pub fn gradient_fd_check(
    p: &Problem,
    lambda: f64,
    pairs: usize,
    gen: &mut rng::SplitMix64,
) -> (f64, f64) {
    let g = p.grid();
    let mut worst_order = f64::INFINITY;
    let mut worst_rel = 0.0_f64;
    for _ in 0..pairs {
        let u = random_field(g, gen);
        let v = random_field(g, gen);
        let exact = dot(&gradient(p, &u, lambda), &v);
        let fd = |eps: f64| {
            (energy(p, &u.axpy(eps, &v), lambda) - energy(p, &u.axpy(-eps, &v), lambda))
                / (2.0 * eps)
        };
        let scale = exact.abs().max(energy(p, &u, lambda).abs()).max(1e-300);
        let e1 = (fd(1e-2) - exact).abs();
        let e2 = (fd(5e-3) - exact).abs();
        let order = if e1 <= 1e-11 * scale {
            2.0
        } else {
            (e1 / e2).log2()
        };
        worst_order = worst_order.min(order);
        worst_rel = worst_rel.max(e2 / scale);
    }
    (worst_order, worst_rel)
}

/// Every CSV the suite produces, written into `dir`: oracle profiles, the
/// reference branch, the threshold probes, the limit study and the
/// embedding-constant probes. Returns the files in a fixed order.
pub fn write_artifacts(cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let suite = Suite::new(cfg.clone(), dir);
    let mut files = Vec::new();
    let p = suite.reference_problem().map_err(Error::Config)?;
    for &lambda in &cfg.acceptance.oracle_lambdas {
        let rec = mountain_pass(&p, lambda, &cfg.solver, None)?;
        let path = dir.join(format!("oracle_profile_lambda_{}.csv", fmt_num(lambda)));
        write_profile_csv(&rec.u, &path)?;
        files.push(path);
    }
    let b = suite.reference_branch().map_err(Error::Config)?;
    let path = dir.join("branch.csv");
    write_branch_csv(b, &path)?;
    files.push(path);

    let r = suite.threshold_report().map_err(Error::Config)?;
    let path = dir.join("threshold.csv");
    write_threshold_csv(&r, &path)?;
    files.push(path);

    let s = suite.limit_run().map_err(Error::Config)?;
    let path = dir.join("limit.csv");
    write_limit_csv(&s, &path)?;
    files.push(path);

    let (g, _, _) = suite.forced_setup().map_err(Error::Config)?;
    let probes = crate::nonhomogeneous::sobolev_probes(g, cfg.forced.p, cfg.seed)?;
    let path = dir.join("sobolev_probes.csv");
    write_csv(
        &path,
        &["probe", "grad_sq", "l2_sq", "u_at_0"],
        probes.iter().enumerate().map(|(k, u)| {
            let nm = crate::radial::norms(u, 0.0);
            vec![
                k.to_string(),
                fmt_num(nm.grad_sq),
                fmt_num(nm.l2_sq),
                fmt_num(u.at_origin()),
            ]
        }),
    )?;
    files.push(path);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_are_numbered_in_order() {
        for (k, c) in CRITERIA.iter().enumerate() {
            assert_eq!(c.id, k + 1);
        }
    }

    #[test]
    fn fd_check_sees_second_order() {
        let g = make_grid(3, 20.0, 300, DomainKind::TruncatedWholeSpace).unwrap();
        let p = Problem::autonomous(&g, Nonlinearity::pure_power(3.0).unwrap());
        let mut gen = rng::generator(3);
        let (order, rel) = gradient_fd_check(&p, 1.0, 5, &mut gen);
        assert!(order > 1.9 && rel < 1e-4, "{order} {rel}");
    }
}
