//! Radial shooting, independent of the finite-difference discretization.
//!
//! `u'' + (N−1)/r u' = λu − g(u)` is integrated by RK4 from `u(0) = d`,
//! `u'(0) = 0`, and the initial height is bisected between a trajectory that
//! crosses zero and one that turns back up while still positive.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::radial::{RadialField, RadialGrid};

// Target RK4 step; the step divides the grid spacing exactly.
const MAX_STEP: f64 = 2.5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Crossing,
    Rebound,
    Undecided,
}

struct Ode<'a> {
    dim: f64,
    lambda: f64,
    nl: &'a Nonlinearity,
}

impl Ode<'_> {
    fn accel(&self, r: f64, u: f64, v: f64) -> f64 {
        self.lambda * u - self.nl.g(u) - (self.dim - 1.0) / r * v
    }

    fn rk4(&self, r: f64, u: f64, v: f64, dr: f64) -> (f64, f64) {
        let k1u = v;
        let k1v = self.accel(r, u, v);
        let k2u = v + 0.5 * dr * k1v;
        let k2v = self.accel(r + 0.5 * dr, u + 0.5 * dr * k1u, v + 0.5 * dr * k1v);
        let k3u = v + 0.5 * dr * k2v;
        let k3v = self.accel(r + 0.5 * dr, u + 0.5 * dr * k2u, v + 0.5 * dr * k2v);
        let k4u = v + dr * k3v;
        let k4v = self.accel(r + dr, u + dr * k3u, v + dr * k3v);
        (
            u + dr / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
            v + dr / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
        )
    }

    // Taylor start over the first step, where the 1/r term is singular.
    fn start(&self, d: f64, dr: f64) -> (f64, f64) {
        let a = (self.lambda * d - self.nl.g(d)) / self.dim;
        (d + 0.5 * a * dr * dr, a * dr)
    }

    /// Integrates from `d`, optionally recording `u` every `stride` steps.
    fn shoot(
        &self,
        d: f64,
        dr: f64,
        steps: usize,
        stride: usize,
        mut record: Option<&mut Vec<f64>>,
    ) -> Outcome {
        if let Some(out) = record.as_deref_mut() {
            out.push(d);
        }
        let (mut u, mut v) = self.start(d, dr);
        for step in 1..=steps {
            if step > 1 {
                let r = (step - 1) as f64 * dr;
                (u, v) = self.rk4(r, u, v, dr);
            }
            if u < 0.0 {
                return Outcome::Crossing;
            }
            if v > 0.0 {
                return Outcome::Rebound;
            }
            if step % stride == 0 {
                if let Some(out) = record.as_deref_mut() {
                    out.push(u);
                }
            }
        }
        Outcome::Undecided
    }
}

fn substeps(h: f64) -> usize {
    ((h / MAX_STEP).ceil() as usize).max(4)
}

/// Positive ground state of `-Δu + λu = g(u)` on `R^N`, sampled on `grid`.
pub fn shooting_ground_state(
    dim: usize,
    lambda: f64,
    nl: &Nonlinearity,
    grid: &Arc<RadialGrid>,
) -> Result<RadialField> {
    const D_MIN: f64 = 1e-4;
    const D_MAX: f64 = 1e4;
    let ode = Ode {
        dim: dim as f64,
        lambda,
        nl,
    };
    let k = substeps(grid.spacing());
    let dr = grid.spacing() / k as f64;
    let steps = (grid.interior() + 1) * k;

    let mut lo = None;
    let mut hi = None;
    let mut d = D_MIN;
    while d <= D_MAX {
        match ode.shoot(d, dr, steps, k, None) {
            Outcome::Rebound => lo = Some(d),
            Outcome::Crossing | Outcome::Undecided => {
                hi = Some(d);
                break;
            }
        }
        d *= 1.25;
    }
    let (Some(mut lo), Some(mut hi)) = (lo, hi) else {
        return Err(Error::BracketNotFound {
            lo: D_MIN,
            hi: D_MAX,
        });
    };

    while hi - lo >= 1e-12 * lo {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match ode.shoot(mid, dr, steps, k, None) {
            Outcome::Rebound => lo = mid,
            Outcome::Crossing | Outcome::Undecided => hi = mid,
        }
    }

    let mut values = Vec::with_capacity(grid.len());
    ode.shoot(lo, dr, steps, k, Some(&mut values));
    // Past the turning point the trajectory has left the ground state.
    values.resize(grid.len(), 0.0);
    RadialField::from_values(grid, values)
}

/// Positive solution of `-Δu = u^p` in the ball with a Dirichlet condition,
/// from the Lane–Emden profile `w'' + (N−1)/r w' = −w^p`, `w(0) = 1`, and
/// the scaling `u(r) = (ξ/R)^{2/(p−1)} w(ξ r / R)` with `ξ` the first zero of `w`.
pub fn shooting_ball_ground_state(
    dim: usize,
    p: f64,
    grid: &Arc<RadialGrid>,
) -> Result<RadialField> {
    let nl = Nonlinearity::pure_power(p)?;
    let ode = Ode {
        dim: dim as f64,
        lambda: 0.0,
        nl: &nl,
    };
    // First pass: locate ξ.
    let dr = 1e-4;
    let (mut u, mut v) = ode.start(1.0, dr);
    let mut r = dr;
    let limit = 1e3;
    while u > 0.0 {
        let (nu, nv) = ode.rk4(r, u, v, dr);
        if nu <= 0.0 {
            // bisect the zero inside the last step
            let (mut a, mut b) = (0.0, dr);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if ode.rk4(r, u, v, m).0 > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            r += 0.5 * (a + b);
            break;
        }
        (u, v) = (nu, nv);
        r += dr;
        if r > limit {
            return Err(Error::BracketNotFound { lo: 0.0, hi: limit });
        }
    }
    let xi = r;

    // Second pass: sample w at ξ r_i / R.
    let k = substeps(grid.spacing() * xi / grid.radius());
    let step = xi * grid.spacing() / grid.radius() / k as f64;
    let scale = (xi / grid.radius()).powf(2.0 / (p - 1.0));
    let n = grid.interior();
    let mut values = vec![0.0; grid.len()];
    values[0] = scale;
    let (mut u, mut v) = ode.start(1.0, step);
    for s in 1..=(n * k) {
        if s > 1 {
            (u, v) = ode.rk4((s - 1) as f64 * step, u, v, step);
        }
        if s % k == 0 {
            values[s / k] = scale * u.max(0.0);
        }
    }
    RadialField::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{make_grid, DomainKind};

    #[test]
    fn cubic_ground_state_is_positive_and_decreasing() {
        let g = make_grid(3, 20.0, 1000, DomainKind::TruncatedWholeSpace).unwrap();
        let u = shooting_ground_state(3, 1.0, &Nonlinearity::pure_power(3.0).unwrap(), &g).unwrap();
        // Known value of the cubic NLS ground state at the origin in R³.
        assert!(
            (u.at_origin() - 4.3374).abs() < 1e-3,
            "u(0) = {}",
            u.at_origin()
        );
        let v = u.values();
        assert!(v[..600].iter().all(|&x| x > 0.0));
        assert!(v.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn no_bracket_beyond_lambda_star() {
        let g = make_grid(3, 20.0, 400, DomainKind::TruncatedWholeSpace).unwrap();
        let err = shooting_ground_state(3, 1.2, &Nonlinearity::SaturatingCubic, &g);
        assert!(matches!(err, Err(Error::BracketNotFound { .. })));
    }

    #[test]
    fn lane_emden_first_zero() {
        // ξ₁ = 6.89685 for the n = 3 polytrope; u(0) = ξ₁ on the unit ball.
        let g = make_grid(3, 1.0, 400, DomainKind::Ball).unwrap();
        let u = shooting_ball_ground_state(3, 3.0, &g).unwrap();
        assert!(
            (u.at_origin() - 6.89685).abs() < 1e-4,
            "u(0) = {}",
            u.at_origin()
        );
        assert!(u.values()[..=400].iter().all(|&x| x > 0.0));
    }
}
