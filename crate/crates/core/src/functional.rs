//! Discrete functionals `I_λ` (optionally with a potential `V`) and `I_f`,
//! their strong-form gradients, the `A − λB` split and the critical-point
//! diagnostics (Pohozaev, Nehari, energy identity).
//!
//! Conventions: `A(u) = ½‖∇u‖² − ∫V G(u)` and `B(u) = −½‖u‖₂²`, so that
//! `I_λ = A − λB`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{check_hypotheses, eval_potential, golden_max, Nonlinearity, Potential};
use crate::radial::{
    apply_operator, dirichlet_form, dot, norms, solve_shifted, DomainKind, RadialField, RadialGrid,
};

#[derive(Debug, Clone)]
pub enum Mode {
    /// `-Δu + λu = g(u)` on `R^N`.
    Autonomous,
    /// `-Δu + λu = V(x) g(u)` on `R^N`.
    Weighted,
    /// `-Δu = (u⁺)^p + f` on the ball; `λ` is ignored.
    Forced { forcing: RadialField },
}

#[derive(Debug, Clone)]
pub struct Problem {
    grid: Arc<RadialGrid>,
    nl: Nonlinearity,
    potential: Potential,
    weight: RadialField,
    mode: Mode,
    positive_part: bool,
}

impl Problem {
    pub fn autonomous(grid: &Arc<RadialGrid>, nl: Nonlinearity) -> Self {
        Self {
            grid: Arc::clone(grid),
            nl,
            potential: Potential::One,
            weight: RadialField::from_fn(grid, |_| 1.0),
            mode: Mode::Autonomous,
            positive_part: false,
        }
    }

    pub fn weighted(
        grid: &Arc<RadialGrid>,
        nl: Nonlinearity,
        potential: Potential,
    ) -> Result<Self> {
        let weight = eval_potential(&potential, grid)?;
        Ok(Self {
            grid: Arc::clone(grid),
            nl,
            potential,
            weight,
            mode: Mode::Weighted,
            positive_part: false,
        })
    }

    /// `I_f` with `g(s) = (s⁺)^p` on a ball grid.
    pub fn forced(grid: &Arc<RadialGrid>, p: f64, forcing: RadialField) -> Result<Self> {
        if grid.kind() != DomainKind::Ball {
            return Err(Error::InvalidProblem(
                "the forced problem lives on a ball grid".into(),
            ));
        }
        if !Arc::ptr_eq(forcing.grid(), grid) && **forcing.grid() != **grid {
            return Err(Error::InvalidProblem(
                "forcing sampled on a different grid".into(),
            ));
        }
        let nl = Nonlinearity::positive_part_power(p)?;
        Ok(Self {
            grid: Arc::clone(grid),
            nl,
            potential: Potential::One,
            weight: RadialField::from_fn(grid, |_| 1.0),
            mode: Mode::Forced { forcing },
            positive_part: false,
        })
    }

    /// Replaces `g` by `s ↦ g(s⁺)` in λ-family modes.
    pub fn with_positive_part(mut self, on: bool) -> Self {
        self.positive_part = on && self.is_lambda_family();
        self
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn positive_part(&self) -> bool {
        self.positive_part
    }

    pub fn is_lambda_family(&self) -> bool {
        !matches!(self.mode, Mode::Forced { .. })
    }

    pub fn is_autonomous(&self) -> bool {
        matches!(self.mode, Mode::Autonomous)
    }

    pub fn forcing(&self) -> Option<&RadialField> {
        match &self.mode {
            Mode::Forced { forcing } => Some(forcing),
            _ => None,
        }
    }

    /// The same forced problem with a different forcing term.
    pub fn with_forcing(&self, forcing: RadialField) -> Result<Self> {
        match self.mode {
            Mode::Forced { .. } => {
                let p = match self.nl {
                    Nonlinearity::PositivePartPower { p } => p,
                    _ => unreachable!("forced problems carry a positive-part power"),
                };
                Self::forced(&self.grid, p, forcing)
            }
            _ => Err(Error::InvalidProblem("not a forced problem".into())),
        }
    }

    pub fn g(&self, s: f64) -> f64 {
        if self.positive_part {
            self.nl.g(s.max(0.0))
        } else {
            self.nl.g(s)
        }
    }

    #[allow(non_snake_case)]
    pub fn G(&self, s: f64) -> f64 {
        if self.positive_part {
            self.nl.G(s.max(0.0))
        } else {
            self.nl.G(s)
        }
    }

    pub fn dg(&self, s: f64) -> f64 {
        if self.positive_part && s < 0.0 {
            0.0
        } else {
            self.nl.dg(s)
        }
    }

    /// Nodal potential samples (`≡ 1` outside weighted mode).
    pub fn weight(&self) -> &RadialField {
        &self.weight
    }

    /// Shift of the preconditioner `K = -Δ_h + max(λ, 1)`.
    pub fn preconditioner_shift(&self, lambda: f64) -> f64 {
        if self.is_lambda_family() {
            lambda.max(1.0)
        } else {
            1.0
        }
    }

    // ∫ V G(u)
    fn potential_integral(&self, u: &RadialField) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(self.weight.values().iter().zip(u.values()))
            .map(|(w, (v, x))| w * v * self.G(*x))
            .sum()
    }

    /// `∫ V g(u) u`.
    pub fn nonlinear_pairing(&self, u: &RadialField) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(self.weight.values().iter().zip(u.values()))
            .map(|(w, (v, x))| w * v * self.g(*x) * x)
            .sum()
    }
}

pub fn energy(p: &Problem, u: &RadialField, lambda: f64) -> f64 {
    let grad_sq = dirichlet_form(u, u);
    let nonlinear = p.potential_integral(u);
    match &p.mode {
        Mode::Autonomous | Mode::Weighted => 0.5 * (grad_sq + lambda * dot(u, u)) - nonlinear,
        Mode::Forced { forcing } => 0.5 * grad_sq - nonlinear - dot(forcing, u),
    }
}

/// Nodal strong-form residual `-Δ_h u + λu − V g(u)` (`-Δ_h u − g(u) − f` when forced).
pub fn gradient(p: &Problem, u: &RadialField, lambda: f64) -> RadialField {
    let shift = if p.is_lambda_family() { lambda } else { 0.0 };
    let lu = apply_operator(u, shift);
    let forcing = p.forcing();
    let values: Vec<f64> = lu
        .values()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let x = u.values()[i];
            let f = forcing.map_or(0.0, |f| f.values()[i]);
            l - p.weight.values()[i] * p.g(x) - f
        })
        .collect();
    RadialField::from_values(p.grid(), values).expect("same grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit {
    pub a_part: f64,
    pub b_part: f64,
}

pub fn ab_split(p: &Problem, u: &RadialField) -> Result<EnergySplit> {
    if !p.is_lambda_family() {
        return Err(Error::InvalidProblem(
            "A/B split is defined for λ-families only".into(),
        ));
    }
    Ok(EnergySplit {
        a_part: 0.5 * dirichlet_form(u, u) - p.potential_integral(u),
        b_part: -0.5 * dot(u, u),
    })
}

/// `I_{λ_to}(u)` from `I_{λ_from}(u)` and `B(u)` alone.
pub fn transfer_level(
    p: &Problem,
    u: &RadialField,
    lambda_from: f64,
    lambda_to: f64,
) -> Result<f64> {
    let split = ab_split(p, u)?;
    Ok(energy(p, u, lambda_from) + (lambda_from - lambda_to) * split.b_part)
}

/// `I'_{λ_to}(u) = I'_{λ_from}(u) + (λ_to − λ_from) u`.
pub fn transfer_gradient(
    p: &Problem,
    u: &RadialField,
    lambda_from: f64,
    lambda_to: f64,
) -> Result<RadialField> {
    if !p.is_lambda_family() {
        return Err(Error::InvalidProblem(
            "transfer is defined for λ-families only".into(),
        ));
    }
    Ok(gradient(p, u, lambda_from).axpy(lambda_to - lambda_from, u))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevResidual {
    /// `(N−2)‖∇u‖² − 2N[−(λ/2)‖u‖² + ∫G(u)]`.
    pub signed: f64,
    /// `signed / ((N−2)‖∇u‖² + |2N[…]|)`, 0 for `u = 0`.
    pub normalized: f64,
}

pub fn pohozaev_residual(p: &Problem, u: &RadialField, lambda: f64) -> Result<PohozaevResidual> {
    if !p.is_autonomous() {
        return Err(Error::InvalidProblem(
            "the Pohozaev identity is only available in autonomous mode".into(),
        ));
    }
    let nm = norms(u, lambda);
    let nf = p.grid.dim() as f64;
    let lhs = (nf - 2.0) * nm.grad_sq;
    let rhs = 2.0 * nf * (-0.5 * lambda * nm.l2_sq + p.potential_integral(u));
    let signed = lhs - rhs;
    let denom = lhs + rhs.abs();
    Ok(PohozaevResidual {
        signed,
        normalized: if denom > 0.0 { signed / denom } else { 0.0 },
    })
}

/// `I'_λ(u) u`.
pub fn nehari_residual(p: &Problem, u: &RadialField, lambda: f64) -> f64 {
    dot(&gradient(p, u, lambda), u)
}

/// `|I_λ(u) − ‖∇u‖²/N|` for autonomous problems.
pub fn energy_identity_residual(p: &Problem, u: &RadialField, lambda: f64) -> Result<f64> {
    if !p.is_autonomous() {
        return Err(Error::InvalidProblem(
            "the energy identity is only available in autonomous mode".into(),
        ));
    }
    let nf = p.grid.dim() as f64;
    Ok((energy(p, u, lambda) - dirichlet_form(u, u) / nf).abs())
}

/// Dual norm `sqrt(⟨w, K⁻¹w⟩)` with `K = -Δ_h + shift`.
pub fn dual_norm(w: &RadialField, shift: f64) -> Result<f64> {
    let kw = solve_shifted(w, shift)?;
    Ok(dot(w, &kw).max(0.0).sqrt())
}

/// `K`-norm `sqrt(‖∇u‖² + shift·‖u‖²)`.
pub fn k_norm(u: &RadialField, shift: f64) -> f64 {
    norms(u, shift).h1_sq.max(0.0).sqrt()
}

/// Smallest sampled `C_δ` with `|g(s)| ≤ δ|s| + C_δ |s|^{(N+2)/(N−2)}`.
pub fn growth_bound_check(nl: &Nonlinearity, dim: usize, delta: f64) -> Result<f64> {
    if !check_hypotheses(nl, dim).subcritical {
        return Err(Error::HypothesisViolated(format!(
            "{nl} is not subcritical for N = {dim}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "δ must be positive, got {delta}"
        )));
    }
    let crit = crate::radial::critical_exponent(dim);
    let excess = |s: f64| (nl.g(s).abs() - delta * s.abs()) / s.abs().powf(crit);
    let mut best = 0.0_f64;
    for sign in [1.0, -1.0] {
        let f = |log_s: f64| excess(sign * 10f64.powf(log_s));
        let m = 1200;
        let logs: Vec<f64> = (0..=m).map(|k| -6.0 + 12.0 * k as f64 / m as f64).collect();
        let (k, v) = logs
            .iter()
            .enumerate()
            .map(|(k, &l)| (k, f(l)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        let refined = if k > 0 && k < m {
            golden_max(f, logs[k - 1], logs[k + 1], 1e-13).1
        } else {
            v
        };
        best = best.max(v).max(refined);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{make_grid, DomainKind};
    use approx::assert_relative_eq;
    use rand_core::{RngCore, SeedableRng};
    use rand_xoshiro::SplitMix64;

    fn whole(n: usize) -> Arc<RadialGrid> {
        make_grid(3, 10.0, n, DomainKind::TruncatedWholeSpace).unwrap()
    }

    fn bump(grid: &Arc<RadialGrid>, amp: f64, width: f64) -> RadialField {
        RadialField::from_fn(grid, |r| amp * (-(r / width).powi(2)).exp())
    }

    fn unit(rng: &mut SplitMix64) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn zero_field() {
        let g = whole(200);
        let p = Problem::autonomous(&g, Nonlinearity::pure_power(3.0).unwrap());
        let z = RadialField::zeros(&g);
        assert_eq!(energy(&p, &z, 1.0), 0.0);
        assert!(gradient(&p, &z, 1.0).values().iter().all(|&v| v == 0.0));
        assert_eq!(
            ab_split(&p, &z).unwrap(),
            EnergySplit {
                a_part: 0.0,
                b_part: 0.0
            }
        );
        assert_eq!(pohozaev_residual(&p, &z, 1.0).unwrap().signed, 0.0);
        assert_eq!(nehari_residual(&p, &z, 1.0), 0.0);
    }

    #[test]
    fn energy_is_affine_in_lambda() {
        let g = whole(300);
        let p = Problem::autonomous(&g, Nonlinearity::pure_power(3.0).unwrap());
        let u = bump(&g, 1.3, 2.0);
        let split = ab_split(&p, &u).unwrap();
        for lambda in [0.5, 1.0, 2.0] {
            let e = energy(&p, &u, lambda);
            assert_relative_eq!(
                split.a_part - lambda * split.b_part,
                e,
                max_relative = 1e-12
            );
        }
        let slope = energy(&p, &u, 2.0) - energy(&p, &u, 1.0);
        assert_relative_eq!(slope, 0.5 * dot(&u, &u), max_relative = 1e-12);
    }

    #[test]
    fn split_homogeneity_for_cubic() {
        let g = whole(300);
        let p = Problem::autonomous(&g, Nonlinearity::pure_power(3.0).unwrap());
        let u = bump(&g, 0.8, 1.5);
        let s1 = ab_split(&p, &u).unwrap();
        let s2 = ab_split(&p, &u.scale(2.0)).unwrap();
        assert_relative_eq!(s2.b_part, 4.0 * s1.b_part, max_relative = 1e-14);
        // A(2u) = 4·½‖∇u‖² − 16·∫u⁴/4
        let quad = 0.5 * dirichlet_form(&u, &u);
        let quart = quad - s1.a_part;
        assert_relative_eq!(s2.a_part, 4.0 * quad - 16.0 * quart, max_relative = 1e-12);
        assert_relative_eq!(
            s2.a_part - 1.5 * s2.b_part,
            energy(&p, &u.scale(2.0), 1.5),
            max_relative = 1e-12
        );
    }

    #[test]
    fn transfer_identities_are_exact() {
        let g = whole(300);
        let p = Problem::autonomous(&g, Nonlinearity::pure_power(3.0).unwrap());
        let mut rng = SplitMix64::seed_from_u64(7);
        for _ in 0..20 {
            let u = bump(&g, 0.5 + 2.0 * unit(&mut rng), 0.5 + 3.0 * unit(&mut rng));
            let (lf, lt) = (0.2 + 2.0 * unit(&mut rng), 0.2 + 2.0 * unit(&mut rng));
            let direct = energy(&p, &u, lt);
            assert_relative_eq!(
                transfer_level(&p, &u, lf, lt).unwrap(),
                direct,
                max_relative = 1e-12
            );
            let tg = transfer_gradient(&p, &u, lf, lt).unwrap();
            let dg = gradient(&p, &u, lt);
            let scale = dg.sup_norm().max(1.0);
            for (a, b) in tg.values().iter().zip(dg.values()) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
        let u = bump(&g, 1.0, 1.0);
        assert_eq!(
            transfer_level(&p, &u, 1.3, 1.3).unwrap(),
            energy(&p, &u, 1.3)
        );
        assert_eq!(
            transfer_gradient(&p, &u, 1.3, 1.3).unwrap(),
            gradient(&p, &u, 1.3)
        );
    }

    #[test]
    fn forced_mode_restrictions() {
        let whole_grid = whole(100);
        let f = RadialField::zeros(&whole_grid);
        assert!(Problem::forced(&whole_grid, 3.0, f).is_err());
        let b = make_grid(3, 1.0, 100, DomainKind::Ball).unwrap();
        let p = Problem::forced(&b, 3.0, RadialField::from_fn(&b, |r| r.cos())).unwrap();
        let u = RadialField::from_fn(&b, |r| 1.0 - r * r);
        assert!(ab_split(&p, &u).is_err());
        assert!(pohozaev_residual(&p, &u, 1.0).is_err());
        assert!(transfer_gradient(&p, &u, 1.0, 2.0).is_err());
        assert_eq!(energy(&p, &RadialField::zeros(&b), 0.0), 0.0);
    }

    #[test]
    fn pohozaev_nonzero_off_critical() {
        let g = whole(300);
        let p = Problem::autonomous(&g, Nonlinearity::pure_power(3.0).unwrap());
        let tent = RadialField::from_fn(&g, |r| (1.0 - r / 3.0).max(0.0));
        assert!(pohozaev_residual(&p, &tent, 1.0).unwrap().normalized.abs() > 1e-2);
    }

    #[test]
    fn nehari_ray_has_single_positive_root() {
        // t²‖u‖²_{H¹_λ} − t⁴‖u‖⁴₄ vanishes at t = ‖u‖_{H¹_λ} / ‖u‖²₄ only.
        let g = whole(300);
        let p = Problem::autonomous(&g, Nonlinearity::pure_power(3.0).unwrap());
        let u = bump(&g, 1.0, 2.0);
        let h1 = norms(&u, 1.0).h1_sq;
        let l4 = crate::radial::lp_norm(&u, 4.0).powi(4);
        let t_star = (h1 / l4).sqrt();
        let f = |t: f64| nehari_residual(&p, &u.scale(t), 1.0);
        let ts: Vec<f64> = (1..400).map(|k| k as f64 * 4.0 * t_star / 400.0).collect();
        let roots = ts
            .windows(2)
            .filter(|w| f(w[0]).signum() != f(w[1]).signum())
            .count();
        assert_eq!(roots, 1);
        assert!(f(t_star).abs() <= 1e-10 * t_star * t_star * h1);
    }

    #[test]
    fn growth_bound_constants() {
        let cubic = Nonlinearity::pure_power(3.0).unwrap();
        // sup_s (s³ − δs)/s⁵ = 1/(4δ)
        let c = growth_bound_check(&cubic, 3, 0.1).unwrap();
        assert_relative_eq!(c, 2.5, max_relative = 1e-9);
        let mut rng = SplitMix64::seed_from_u64(11);
        for _ in 0..10_000 {
            let s = (unit(&mut rng) - 0.5) * 10f64.powf(-4.0 + 8.0 * unit(&mut rng));
            let bound = 0.1 * s.abs() + c * s.abs().powi(5);
            assert!(cubic.g(s).abs() <= bound * (1.0 + 1e-9), "s = {s}");
        }
        let deltas = [0.05, 0.1, 0.5, 1.0];
        let cs: Vec<f64> = deltas
            .iter()
            .map(|&d| growth_bound_check(&cubic, 3, d).unwrap())
            .collect();
        assert!(cs.windows(2).all(|w| w[1] <= w[0]));

        let sat = growth_bound_check(&Nonlinearity::SaturatingCubic, 3, 0.5).unwrap();
        assert!(sat.is_finite() && sat > 0.0);
        assert!(growth_bound_check(&Nonlinearity::pure_power(5.0).unwrap(), 3, 0.1).is_err());
    }
}
