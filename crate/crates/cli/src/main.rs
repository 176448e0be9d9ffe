//! `varcont`: mountain-pass ground states, λ-continuation and forced-problem
//! studies driven by a TOML (or JSON) run configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use varcont::acceptance::{Suite, CRITERIA};
use varcont::config::{ModeSpec, RunConfig};
use varcont::continuation::{
    branch_limit_check, diagnose, ps_transfer_check, scaling_check, sweep, write_branch_csv,
    write_json, write_profile_csv, write_profiles,
};
use varcont::functional::Problem;
use varcont::nonhomogeneous::{
    geometry_constants, limit_study, positivity_threshold, solve_forced, write_limit_csv,
    write_threshold_csv,
};
use varcont::nonlinearity::{check_hypotheses, lambda_star};
use varcont::solvers::{mountain_pass, SolutionRecord};
use varcont::Error;

#[derive(Parser)]
#[command(
    name = "varcont",
    version,
    about = "Mountain-pass ground states and continuation studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`.toml`, or `.json` by extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random probes (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps and studies.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Single solve at λ, or at forcing amplitude α in forced mode.
    Solve {
        #[command(flatten)]
        common: Common,
        /// λ (or α in forced mode); defaults to `problem.lambda`.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// λ-sweep with branch diagnostics.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Geometry constants, positivity threshold and small-forcing limit study.
    Threshold {
        #[command(flatten)]
        common: Common,
    },
    /// Runs the acceptance suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Print the criteria without running them.
        #[arg(long)]
        list: bool,
    },
    /// Prints λ* and the hypothesis report of the configured nonlinearity.
    LambdaStar {
        #[command(flatten)]
        common: Common,
    },
}

/// Failures mapped to process exit codes.
enum Failure {
    Config(String),
    NotConverged(String),
    Acceptance(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::NotConverged(_) => 2,
            Self::Acceptance(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::EndpointNotFound { .. }
            | Error::CollapsedToZero { .. }
            | Error::BracketNotFound { .. }
            | Error::Singular(_)
            | Error::NoPositiveSolutionAtZero => Self::NotConverged(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Failure> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    let cfg = cfg.validated()?;
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let out = cfg.out.clone();
    Ok((cfg, out))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("{}: {e}", dir.display())))
}

fn summary(rec: &SolutionRecord) -> serde_json::Value {
    json!({
        "lambda": rec.lambda,
        "level": rec.level,
        "grad_residual": rec.grad_residual,
        "grad_norm": rec.grad_norm,
        "pohozaev_residual": rec.pohozaev_residual,
        "nehari_residual": rec.nehari_residual,
        "energy_identity_residual": rec.energy_identity_residual,
        "grad_sq": rec.grad_sq,
        "l2_sq": rec.l2_sq,
        "u_at_0": rec.u.at_origin(),
        "min_u": rec.u.interior_min(),
        "positive": rec.positive,
        "converged": rec.converged,
        "iterations": rec.iterations,
        "newton_iterations": rec.newton_iterations,
        "descent_monotone": rec.descent_monotone,
    })
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn cmd_solve(common: &Common, lambda: Option<f64>) -> Outcome {
    let (cfg, out) = load(common)?;
    let value = lambda.unwrap_or(cfg.problem.lambda);
    let (rec, extra) = if cfg.problem.mode == ModeSpec::Forced {
        let fs = &cfg.forced;
        let grid = fs.grid(cfg.problem.dim)?;
        let geo = geometry_constants(&grid, fs.p, fs.q, cfg.seed)?;
        let forcing = fs.forcing(&grid)?.with_amplitude(value)?;
        let s = solve_forced(&grid, fs.p, &forcing, &geo, &cfg.solver)?;
        let extra = json!({
            "geometry": geo,
            "above_beta": s.above_beta,
            "barrier_holds": s.barrier_holds,
            "probe_bound": s.probe_bound,
            "level_bound_holds": s.level_bound_holds,
        });
        (s.record, Some(extra))
    } else {
        let grid = cfg.grid()?;
        let p = cfg.lambda_problem(&grid)?;
        (mountain_pass(&p, value, &cfg.solver, None)?, None)
    };
    let mut report = summary(&rec);
    if let (Some(obj), Some(serde_json::Value::Object(extra))) = (report.as_object_mut(), extra) {
        obj.extend(extra);
    }
    print_json(&report);
    ensure_dir(&out)?;
    write_profile_csv(&rec.u, &out.join("profile.csv"))?;
    write_json(&report, &out.join("solution.json"))?;
    if !rec.converged {
        return Err(Failure::NotConverged(format!(
            "residual {:.3e} above tolerance {:.1e}",
            rec.grad_residual, cfg.solver.grad_tol
        )));
    }
    Ok(())
}

fn cmd_sweep(common: &Common) -> Outcome {
    let (cfg, out) = load(common)?;
    let grid = cfg.grid()?;
    let p: Problem = cfg.lambda_problem(&grid)?;
    let lambdas = cfg.sweep.lambda_grid()?;
    let branch = sweep(&p, &lambdas, &cfg.solver, cfg.sweep.warm)?;
    if branch.records.is_empty() {
        return Err(Failure::NotConverged("no λ on the grid converged".into()));
    }
    let mut diag = diagnose(&branch);
    let lambda0 = cfg.sweep.lambda0;
    let in_hull = lambda0 >= branch.records[0].lambda
        && lambda0 <= branch.records[branch.records.len() - 1].lambda;
    if in_hull {
        diag.transfer_report = Some(ps_transfer_check(&branch, lambda0)?);
    }
    if diag.scaling_report.is_none()
        && p.nonlinearity().pure_power_exponent().is_some()
        && p.is_autonomous()
    {
        let lambda_ref = branch.records[0].lambda;
        diag.scaling_report = scaling_check(&branch, lambda_ref).ok();
    }
    let limit = if in_hull {
        branch_limit_check(&branch, lambda0, cfg.sweep.neighbours).ok()
    } else {
        None
    };
    ensure_dir(&out)?;
    write_branch_csv(&branch, &out.join("branch.csv"))?;
    write_profiles(&branch, &out.join("profiles"))?;
    let report = json!({ "diagnostics": diag, "limit_report": limit });
    write_json(&report, &out.join("diagnostics.json"))?;
    println!(
        "{} records, {} gaps, levels [{:.8}, {:.8}], monotone {}",
        branch.records.len(),
        branch.gaps.len(),
        diag.levels_interval.0,
        diag.levels_interval.1,
        diag.monotone
    );
    for gap in &branch.gaps {
        println!("gap at λ = {}: {}", gap.lambda, gap.reason);
    }
    Ok(())
}

fn cmd_threshold(common: &Common) -> Outcome {
    let (cfg, out) = load(common)?;
    let fs = &cfg.forced;
    let grid = fs.grid(cfg.problem.dim)?;
    let geo = geometry_constants(&grid, fs.p, fs.q, cfg.seed)?;
    let profile = fs.forcing(&grid)?;
    let threshold = positivity_threshold(&grid, fs.p, &profile, &geo, &cfg.solver, &cfg.threshold)?;
    let amplitudes: Vec<f64> = fs.amplitude_factors.iter().map(|k| k * geo.beta).collect();
    let limit = limit_study(&grid, fs.p, &profile, &geo, &amplitudes, &cfg.solver)?;
    ensure_dir(&out)?;
    write_threshold_csv(&threshold, &out.join("threshold.csv"))?;
    write_limit_csv(&limit, &out.join("limit.csv"))?;
    write_json(&geo, &out.join("geometry.json"))?;
    write_json(&threshold, &out.join("threshold.json"))?;
    write_json(&limit, &out.join("limit.json"))?;
    println!(
        "C = {:.6}, a = {:.6}, b = {:.6}, β = {:.6}",
        geo.c_sobolev, geo.a, geo.b, geo.beta
    );
    match threshold.alpha_hat {
        Some(a) => println!("α̂ = {a} ({:.4}·β)", a / geo.beta),
        None => println!(
            "degenerate run: positive solutions up to α_max = {} ({}·β)",
            threshold.alpha_max,
            threshold.alpha_max / geo.beta
        ),
    }
    println!(
        "limit study: sup distances monotone {}, continuity constant {:.4}",
        limit.sup_monotone, limit.continuity_constant
    );
    Ok(())
}

fn cmd_verify(common: &Common, list: bool) -> Outcome {
    if list {
        for c in &CRITERIA {
            println!("{:>2} {:<28} {}", c.id, c.name, c.summary);
        }
        return Ok(());
    }
    let (cfg, out) = load(common)?;
    let suite = Suite::new(cfg, &out);
    let mut failed = 0;
    for c in &CRITERIA {
        let o = suite.run(c.id);
        println!("{o}");
        failed += usize::from(!o.passed);
    }
    println!(
        "{} of {} criteria passed",
        CRITERIA.len() - failed,
        CRITERIA.len()
    );
    if failed > 0 {
        return Err(Failure::Acceptance(failed));
    }
    Ok(())
}

fn cmd_lambda_star(common: &Common) -> Outcome {
    let (cfg, _) = load(common)?;
    let nl = &cfg.problem.nonlinearity;
    let ls = lambda_star(nl)?;
    let hyp = check_hypotheses(nl, cfg.problem.dim);
    let value = if ls.is_infinite() {
        json!("inf")
    } else {
        json!(ls.value)
    };
    print_json(&json!({
        "nonlinearity": nl,
        "lambda_star": value,
        "attained": ls.attained,
        "argmax": ls.argmax,
        "hypotheses": hyp,
    }));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { common, lambda } => cmd_solve(common, *lambda),
        Command::Sweep { common } => cmd_sweep(common),
        Command::Threshold { common } => cmd_threshold(common),
        Command::Verify { common, list } => cmd_verify(common, *list),
        Command::LambdaStar { common } => cmd_lambda_star(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => log::error!("{m}"),
                Failure::NotConverged(m) => log::error!("not converged: {m}"),
                Failure::Acceptance(k) => log::error!("{k} acceptance criteria failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
