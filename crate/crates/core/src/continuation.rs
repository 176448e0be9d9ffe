//! λ-sweeps, branch diagnostics, and the transfer/limit checks along a branch.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{dual_norm, energy, gradient, Problem};
use crate::nonlinearity::{check_hypotheses, H4Status};
use crate::radial::{norms, RadialField};
use crate::solvers::{mountain_pass, MountainPassConfig, SolutionRecord};

/// A λ at which no converged record was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub lambda: f64,
    pub reason: String,
}

/// Converged records in ascending `λ`, plus the gaps left by failed solves.
#[derive(Debug, Clone)]
pub struct Branch {
    pub problem: Problem,
    pub records: Vec<SolutionRecord>,
    pub lambda_grid: Vec<f64>,
    pub warm_started: bool,
    pub gaps: Vec<Gap>,
}

impl Branch {
    pub fn lambdas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda).collect()
    }

    /// The record whose `λ` equals `lambda` up to `1e-12` relative.
    pub fn record_at(&self, lambda: f64) -> Option<&SolutionRecord> {
        self.records
            .iter()
            .find(|r| (r.lambda - lambda).abs() <= 1e-12 * lambda.abs().max(1.0))
    }
}

/// `λ_0, λ_0 + h, …` up to `λ_1` inclusive, each node computed as `λ_0 + k·h`.
pub fn lambda_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(Error::Config(format!(
            "invalid λ range {start}..{stop} step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

fn check_grid(lambda_grid: &[f64]) -> Result<()> {
    if lambda_grid.is_empty() {
        return Err(Error::Config("the λ grid is empty".into()));
    }
    if let Some(w) = lambda_grid.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::Config(format!(
            "the λ grid must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

fn classify(
    lambda: f64,
    outcome: Result<SolutionRecord>,
) -> std::result::Result<SolutionRecord, Gap> {
    match outcome {
        Ok(r) if r.converged => Ok(r),
        Ok(r) => Err(Gap {
            lambda,
            reason: format!("not converged (residual {:e})", r.grad_residual),
        }),
        Err(e) => Err(Gap {
            lambda,
            reason: e.to_string(),
        }),
    }
}

/// Solves at every `λ` of the grid. Warm mode starts each solve from the
/// previous converged record; cold mode solves all points independently and
/// in parallel. Failed points become gaps.
pub fn sweep(
    p: &Problem,
    lambda_grid: &[f64],
    cfg: &MountainPassConfig,
    warm: bool,
) -> Result<Branch> {
    check_grid(lambda_grid)?;
    cfg.validate()?;
    if !p.is_lambda_family() {
        return Err(Error::InvalidProblem(
            "sweeps run over λ-family problems".into(),
        ));
    }
    let outcomes: Vec<std::result::Result<SolutionRecord, Gap>> = if warm {
        let mut previous: Option<RadialField> = None;
        lambda_grid
            .iter()
            .map(|&lambda| {
                let out = classify(lambda, mountain_pass(p, lambda, cfg, previous.as_ref()));
                if let Ok(r) = &out {
                    previous = Some(r.u.clone());
                }
                out
            })
            .collect()
    } else {
        lambda_grid
            .par_iter()
            .map(|&lambda| classify(lambda, mountain_pass(p, lambda, cfg, None)))
            .collect()
    };

    let mut records = Vec::new();
    let mut gaps = Vec::new();
    for out in outcomes {
        match out {
            Ok(r) => records.push(r),
            Err(gap) => {
                log::warn!("sweep: gap at λ = {}: {}", gap.lambda, gap.reason);
                gaps.push(gap);
            }
        }
    }
    Ok(Branch {
        problem: p.clone(),
        records,
        lambda_grid: lambda_grid.to_vec(),
        warm_started: warm,
        gaps,
    })
}

/// Plain `H¹` distance `sqrt(‖∇w‖² + ‖w‖²)`.
pub fn h1_distance(u: &RadialField, v: &RadialField) -> f64 {
    norms(&u.axpy(-1.0, v), 1.0).h1_sq.max(0.0).sqrt()
}

/// The a-priori bound `‖u‖²_λ ≤ level / (½ − 1/μ)` at a critical point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub mu: f64,
    /// Largest `‖u‖²_λ · (½ − 1/μ) / level` over the branch.
    pub max_ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingEntry {
    pub lambda: f64,
    pub ratio: f64,
    pub predicted: f64,
    pub relative_deviation: f64,
}

/// `m_λ / m_ref` against `(λ/λ_ref)^θ`, `θ = 2/(p−1) + 1 − N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub exponent: f64,
    pub theta: f64,
    pub lambda_ref: f64,
    pub entries: Vec<ScalingEntry>,
    pub max_relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferEntry {
    pub lambda: f64,
    /// `‖I'_{λ0}(u_n)‖` in the dual of `H¹`.
    pub residual: f64,
    pub residual_bound: f64,
    /// `|I_{λ0}(u_n) − level_n|`.
    pub level_gap: f64,
    pub level_bound: f64,
    pub holds: bool,
}

/// Transfer of each record to `λ0` (the Palais–Smale transfer of a branch).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub lambda0: f64,
    pub slack: f64,
    pub entries: Vec<TransferEntry>,
    pub all_hold: bool,
    /// Smallest `C` with `residual_n ≤ C |λ_n − λ0|` over `λ_n ≠ λ0`.
    pub lipschitz_constant: Option<f64>,
    /// Least-squares slope of `log residual` against `log |λ_n − λ0|`.
    pub residual_decay_exponent: Option<f64>,
    pub level_decay_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEntry {
    pub lambda: f64,
    pub h1_distance: f64,
}

/// `‖u_{λ_n} − u_{λ0}‖_{H¹}` for the nearest records on each side of `λ0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub lambda0: f64,
    pub entries: Vec<LimitEntry>,
    pub max_distance: f64,
    /// Least-squares slope of `log distance` against `log |λ_n − λ0|`.
    pub decay_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDiagnostics {
    /// Observed level hull `S = [min, max]`.
    pub levels_interval: (f64, f64),
    pub monotone: bool,
    pub max_level_jump: f64,
    pub max_field_jump: f64,
    /// Largest `‖u‖²_λ` on the branch.
    pub max_h1_sq: f64,
    pub coercivity: Option<CoercivityReport>,
    pub transfer_report: Option<TransferReport>,
    pub scaling_report: Option<ScalingReport>,
    pub gaps: Vec<Gap>,
}

/// Level hull, monotonicity within `1e-9·scale`, consecutive jumps, and the
/// a-priori norm bound. The scaling report is attached for pure powers when
/// the branch contains `λ = 1`; the transfer report is left to the caller.
pub fn diagnose(branch: &Branch) -> BranchDiagnostics {
    let levels: Vec<f64> = branch.records.iter().map(|r| r.level).collect();
    let lo = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let levels_interval = if levels.is_empty() {
        (0.0, 0.0)
    } else {
        (lo, hi)
    };
    let scale = levels.iter().fold(0.0_f64, |m, l| m.max(l.abs())).max(1.0);
    let monotone = levels.windows(2).all(|w| w[1] >= w[0] - 1e-9 * scale);
    let max_level_jump = levels
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    let max_field_jump = branch
        .records
        .windows(2)
        .map(|w| h1_distance(&w[1].u, &w[0].u))
        .fold(0.0, f64::max);
    let h1: Vec<f64> = branch
        .records
        .iter()
        .map(|r| r.grad_sq + r.lambda * r.l2_sq)
        .collect();
    let max_h1_sq = h1.iter().copied().fold(0.0, f64::max);

    let p = &branch.problem;
    let coercivity = match check_hypotheses(p.nonlinearity(), p.grid().dim()).h4 {
        H4Status::Holds { mu } if !branch.records.is_empty() => {
            let factor = 0.5 - 1.0 / mu;
            let max_ratio = branch
                .records
                .iter()
                .zip(&h1)
                .map(|(r, &n)| n * factor / r.level)
                .fold(0.0, f64::max);
            Some(CoercivityReport {
                mu,
                max_ratio,
                holds: max_ratio <= 1.0 + 1e-6,
            })
        }
        _ => None,
    };
    let scaling_report = if branch.record_at(1.0).is_some() {
        scaling_check(branch, 1.0).ok()
    } else {
        None
    };

    BranchDiagnostics {
        levels_interval,
        monotone,
        max_level_jump,
        max_field_jump,
        max_h1_sq,
        coercivity,
        transfer_report: None,
        scaling_report,
        gaps: branch.gaps.clone(),
    }
}

/// Scaling exponent of `m_λ` for `g(s) = |s|^{p−1}s` in dimension `N`.
pub fn scaling_exponent(p: f64, dim: usize) -> f64 {
    2.0 / (p - 1.0) + 1.0 - dim as f64 / 2.0
}

pub fn scaling_check(branch: &Branch, lambda_ref: f64) -> Result<ScalingReport> {
    let p = &branch.problem;
    let exponent = match p.nonlinearity().pure_power_exponent() {
        Some(e) if p.is_autonomous() => e,
        _ => {
            return Err(Error::InvalidProblem(format!(
                "the scaling law needs an autonomous pure power, got {}",
                p.nonlinearity()
            )))
        }
    };
    let reference = branch.record_at(lambda_ref).ok_or_else(|| {
        Error::InvalidProblem(format!("no record at the reference λ = {lambda_ref}"))
    })?;
    let theta = scaling_exponent(exponent, p.grid().dim());
    let entries: Vec<ScalingEntry> = branch
        .records
        .iter()
        .map(|r| {
            let ratio = r.level / reference.level;
            let predicted = (r.lambda / lambda_ref).powf(theta);
            ScalingEntry {
                lambda: r.lambda,
                ratio,
                predicted,
                relative_deviation: (ratio - predicted).abs() / predicted,
            }
        })
        .collect();
    let max_relative_deviation = entries
        .iter()
        .map(|e| e.relative_deviation)
        .fold(0.0, f64::max);
    Ok(ScalingReport {
        exponent,
        theta,
        lambda_ref,
        entries,
        max_relative_deviation,
    })
}

fn lambda_hull(branch: &Branch, lambda0: f64) -> Result<()> {
    let ls = branch.lambdas();
    match (ls.first(), ls.last()) {
        (Some(&a), Some(&b)) if lambda0 >= a && lambda0 <= b => Ok(()),
        _ => Err(Error::InvalidProblem(format!(
            "λ0 = {lambda0} lies outside the branch"
        ))),
    }
}

// Least-squares slope of log y against log x over the positive pairs.
fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Transfers every record to `λ0` and checks
/// `‖I'_{λ0}(u_n)‖ ≤ ‖I'_{λ_n}(u_n)‖ + |λ_n − λ0|·‖u_n‖₂ + slack` and
/// `|I_{λ0}(u_n) − level_n| ≤ 2|λ_n − λ0|·|B(u_n)| + slack`, `slack = 1e-6·scale`.
/// Dual norms are taken against `-Δ_h + 1`; the first term is the stored
/// `grad_norm` of the record.
pub fn ps_transfer_check(branch: &Branch, lambda0: f64) -> Result<TransferReport> {
    lambda_hull(branch, lambda0)?;
    let p = &branch.problem;
    let scale = branch
        .records
        .iter()
        .fold(0.0_f64, |m, r| m.max(r.level.abs()))
        .max(1.0);
    let slack = 1e-6 * scale;
    let mut entries = Vec::with_capacity(branch.records.len());
    for r in &branch.records {
        let dl = (r.lambda - lambda0).abs();
        let residual = dual_norm(&gradient(p, &r.u, lambda0), 1.0)?;
        let residual_bound = r.grad_norm + dl * r.l2_sq.sqrt() + slack;
        let level_gap = (energy(p, &r.u, lambda0) - r.level).abs();
        let level_bound = 2.0 * dl * 0.5 * r.l2_sq + slack;
        entries.push(TransferEntry {
            lambda: r.lambda,
            residual,
            residual_bound,
            level_gap,
            level_bound,
            holds: residual <= residual_bound && level_gap <= level_bound,
        });
    }
    let off: Vec<&TransferEntry> = entries
        .iter()
        .filter(|e| (e.lambda - lambda0).abs() > 1e-12)
        .collect();
    let lipschitz_constant = (!off.is_empty()).then(|| {
        off.iter()
            .map(|e| e.residual / (e.lambda - lambda0).abs())
            .fold(0.0, f64::max)
    });
    let decay = |f: fn(&TransferEntry) -> f64| {
        log_log_slope(
            &off.iter()
                .map(|e| ((e.lambda - lambda0).abs(), f(e)))
                .collect::<Vec<_>>(),
        )
    };
    Ok(TransferReport {
        lambda0,
        slack,
        all_hold: entries.iter().all(|e| e.holds),
        residual_decay_exponent: decay(|e| e.residual),
        level_decay_exponent: decay(|e| e.level_gap),
        lipschitz_constant,
        entries,
    })
}

/// `H¹` distances from the record at `λ0` to its `k` nearest neighbours on
/// each side.
pub fn branch_limit_check(branch: &Branch, lambda0: f64, k: usize) -> Result<LimitReport> {
    let centre = branch
        .records
        .iter()
        .position(|r| (r.lambda - lambda0).abs() <= 1e-12 * lambda0.abs().max(1.0))
        .ok_or_else(|| Error::InvalidProblem(format!("no record at λ0 = {lambda0}")))?;
    let base = &branch.records[centre].u;
    let lo = centre.saturating_sub(k);
    let hi = (centre + k).min(branch.records.len() - 1);
    let entries: Vec<LimitEntry> = branch.records[lo..=hi]
        .iter()
        .map(|r| LimitEntry {
            lambda: r.lambda,
            h1_distance: h1_distance(&r.u, base),
        })
        .collect();
    let max_distance = entries.iter().map(|e| e.h1_distance).fold(0.0, f64::max);
    let decay_exponent = log_log_slope(
        &entries
            .iter()
            .map(|e| ((e.lambda - lambda0).abs(), e.h1_distance))
            .collect::<Vec<_>>(),
    );
    Ok(LimitReport {
        lambda0,
        entries,
        max_distance,
        decay_exponent,
    })
}

/// Shortest round-trip decimal form, used for every number written to disk.
pub fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// Writes `rows` as a `,`-separated, `\n`-terminated CSV with a header row.
pub fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub const BRANCH_COLUMNS: [&str; 10] = [
    "lambda",
    "level",
    "grad_residual",
    "pohozaev_residual",
    "nehari_residual",
    "energy_identity_residual",
    "l2_sq",
    "grad_sq",
    "u_at_0",
    "positive",
];

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// One row per record with the columns of [`BRANCH_COLUMNS`].
pub fn write_branch_csv(branch: &Branch, path: &Path) -> Result<()> {
    write_csv(
        path,
        &BRANCH_COLUMNS,
        branch.records.iter().map(|r| {
            vec![
                fmt_num(r.lambda),
                fmt_num(r.level),
                fmt_num(r.grad_residual),
                opt(r.pohozaev_residual),
                fmt_num(r.nehari_residual),
                opt(r.energy_identity_residual),
                fmt_num(r.l2_sq),
                fmt_num(r.grad_sq),
                fmt_num(r.u.at_origin()),
                r.positive.to_string(),
            ]
        }),
    )
}

/// `(r, u(r))` over every grid node.
pub fn write_profile_csv(u: &RadialField, path: &Path) -> Result<()> {
    let rows = u
        .grid()
        .nodes()
        .iter()
        .zip(u.values())
        .map(|(r, v)| vec![fmt_num(*r), fmt_num(*v)]);
    write_csv(path, &["r", "u"], rows)
}

/// Writes `profile_lambda_<λ>.csv` per record into `dir`; returns the paths.
pub fn write_profiles(branch: &Branch, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    branch
        .records
        .iter()
        .map(|r| {
            let path = dir.join(format!("profile_lambda_{}.csv", fmt_num(r.lambda)));
            write_profile_csv(&r.u, &path)?;
            Ok(path)
        })
        .collect()
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
