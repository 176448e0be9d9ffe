use crate::error::Result;
use crate::functional::{dual_norm, gradient, k_norm, Problem};
use crate::radial::{solve_tridiagonal, RadialField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iters: usize,
    /// Relative tolerance on `‖I'(u)‖_{K*} / ‖u‖_K`.
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iters: 30,
            tol: 1e-12,
        }
    }
}

const MAX_HALVINGS: usize = 6;
const MAX_INCREASES: usize = 5;

/// Damped Newton on the nodal residual with the tridiagonal Jacobian
/// `-Δ_h + λ − V g'(u)`. Returns the input unchanged when the residual grows
/// for five consecutive damped steps.
pub fn newton_refine(
    p: &Problem,
    u: &RadialField,
    lambda: f64,
    opts: &NewtonOptions,
) -> Result<RadialField> {
    newton_refine_counted(p, u, lambda, opts).map(|(v, _)| v)
}

pub(crate) fn newton_refine_counted(
    p: &Problem,
    u: &RadialField,
    lambda: f64,
    opts: &NewtonOptions,
) -> Result<(RadialField, usize)> {
    let shift = p.preconditioner_shift(lambda);
    let merit = |v: &RadialField| -> Result<(f64, RadialField)> {
        let f = gradient(p, v, lambda);
        let d = dual_norm(&f, shift)?;
        let s = k_norm(v, shift);
        Ok((if s > 0.0 { d / s } else { d }, f))
    };

    let (mut current_merit, mut residual) = merit(u)?;
    if current_merit == 0.0 || !current_merit.is_finite() {
        return Ok((u.clone(), 0));
    }
    let grid = u.grid();
    let n = grid.interior();
    let op_shift = if p.is_lambda_family() { lambda } else { 0.0 };
    let mut current = u.clone();
    let mut increases = 0;
    let mut iters = 0;

    while iters < opts.max_iters && current_merit > opts.tol {
        iters += 1;
        let x = current.values();
        let v = p.weight().values();
        let rows = grid.stencil();
        let lower: Vec<f64> = rows.iter().map(|r| r.lower).collect();
        let upper: Vec<f64> = rows.iter().map(|r| r.upper).collect();
        let diag: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.diag + op_shift - v[i] * p.dg(x[i]))
            .collect();
        let Some(mut step) = solve_tridiagonal(&lower, &diag, &upper, &residual.values()[..=n])
        else {
            log::debug!("newton: singular Jacobian at iteration {iters}");
            break;
        };
        step.push(0.0);
        let step = RadialField::from_values(grid, step)?;

        let mut damping = 1.0;
        let mut best: Option<(f64, RadialField, RadialField)> = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = current.axpy(-damping, &step);
            if trial.is_finite() {
                let (m, f) = merit(&trial)?;
                if m.is_finite() && best.as_ref().is_none_or(|(bm, _, _)| m < *bm) {
                    best = Some((m, trial, f));
                }
                if m < current_merit {
                    break;
                }
            }
            damping *= 0.5;
        }
        let Some((m, trial, f)) = best else { break };
        if m < current_merit {
            increases = 0;
            let stalled = m > 0.5 * current_merit && current_merit < 1e3 * opts.tol;
            current = trial;
            current_merit = m;
            residual = f;
            if stalled {
                break;
            }
        } else {
            increases += 1;
            if increases >= MAX_INCREASES {
                return Ok((u.clone(), iters));
            }
            current = trial;
            current_merit = m;
            residual = f;
        }
    }
    Ok((current, iters))
}
