//! Nonlinearities `g`, their primitives `G`, the hypothesis checks (H1)–(H4),
//! the admissibility threshold `λ*` and radial potentials `V`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{critical_exponent, RadialField, RadialGrid};

// |s|^e, with an integer fast path
#[inline]
fn pow_abs(s: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < 64.0 {
        s.abs().powi(e as i32)
    } else {
        s.abs().powf(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coeff: f64,
    pub exponent: f64,
}

/// A nonlinearity from a closed family, so that every hypothesis can be
/// decided symbolically or by safe sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `g(s) = Σ a_k |s|^{p_k - 1} s`, exponents ascending.
    PowerSum { terms: Vec<PowerTerm> },
    /// `g(s) = s³ / (1 + s²)`.
    SaturatingCubic,
    /// `g(s) = (s⁺)^p`.
    PositivePartPower { p: f64 },
}

impl Nonlinearity {
    pub fn power_sum(terms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut terms: Vec<PowerTerm> = terms
            .into_iter()
            .map(|(coeff, exponent)| PowerTerm { coeff, exponent })
            .collect();
        if terms.is_empty() {
            return Err(Error::InvalidNonlinearity("empty power sum".into()));
        }
        for t in &terms {
            if !(t.exponent > 1.0) || !t.exponent.is_finite() || !t.coeff.is_finite() {
                return Err(Error::InvalidNonlinearity(format!(
                    "power term ({}, {}) needs a finite exponent > 1",
                    t.coeff, t.exponent
                )));
            }
        }
        terms.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
        Ok(Self::PowerSum { terms })
    }

    /// `g(s) = |s|^{p-1} s`.
    pub fn pure_power(p: f64) -> Result<Self> {
        Self::power_sum([(1.0, p)])
    }

    pub fn positive_part_power(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidNonlinearity(format!(
                "positive-part power needs p > 1, got {p}"
            )));
        }
        Ok(Self::PositivePartPower { p })
    }

    /// Re-checks the family invariants, e.g. after deserialization.
    pub fn validated(self) -> Result<Self> {
        match self {
            Self::PowerSum { terms } => {
                Self::power_sum(terms.iter().map(|t| (t.coeff, t.exponent)))
            }
            Self::PositivePartPower { p } => Self::positive_part_power(p),
            Self::SaturatingCubic => Ok(self),
        }
    }

    pub fn g(&self, s: f64) -> f64 {
        match self {
            Self::PowerSum { terms } => terms
                .iter()
                .map(|t| t.coeff * pow_abs(s, t.exponent - 1.0) * s)
                .sum(),
            Self::SaturatingCubic => s * s * s / (1.0 + s * s),
            Self::PositivePartPower { p } => {
                if s > 0.0 {
                    pow_abs(s, *p)
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed-form primitive `G(s) = ∫_0^s g`.
    #[allow(non_snake_case)]
    pub fn G(&self, s: f64) -> f64 {
        match self {
            Self::PowerSum { terms } => terms
                .iter()
                .map(|t| t.coeff * pow_abs(s, t.exponent + 1.0) / (t.exponent + 1.0))
                .sum(),
            Self::SaturatingCubic => {
                let s2 = s * s;
                0.5 * (s2 - s2.ln_1p())
            }
            Self::PositivePartPower { p } => {
                if s > 0.0 {
                    pow_abs(s, p + 1.0) / (p + 1.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// Closed-form derivative `g'(s)`.
    pub fn dg(&self, s: f64) -> f64 {
        match self {
            Self::PowerSum { terms } => terms
                .iter()
                .map(|t| t.coeff * t.exponent * pow_abs(s, t.exponent - 1.0))
                .sum(),
            Self::SaturatingCubic => {
                let s2 = s * s;
                let d = 1.0 + s2;
                (3.0 * s2 + s2 * s2) / (d * d)
            }
            Self::PositivePartPower { p } => {
                if s > 0.0 {
                    p * pow_abs(s, p - 1.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// Exponent `p` when `g(s) = |s|^{p-1} s` exactly.
    pub fn pure_power_exponent(&self) -> Option<f64> {
        match self {
            Self::PowerSum { terms } if terms.len() == 1 && terms[0].coeff == 1.0 => {
                Some(terms[0].exponent)
            }
            _ => None,
        }
    }

    fn all_positive(&self) -> bool {
        match self {
            Self::PowerSum { terms } => terms.iter().all(|t| t.coeff > 0.0),
            _ => true,
        }
    }

    /// `G` has a positive super-quadratic leading term, so `2G(ν)/ν² → ∞`.
    fn superquadratic_leading_term(&self) -> bool {
        match self {
            Self::PowerSum { terms } => terms.last().is_some_and(|t| t.coeff > 0.0),
            Self::PositivePartPower { .. } => true,
            Self::SaturatingCubic => false,
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerSum { terms } => {
                write!(f, "power_sum[")?;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "({}, {})", t.coeff, t.exponent)?;
                }
                write!(f, "]")
            }
            Self::SaturatingCubic => write!(f, "saturating_cubic"),
            Self::PositivePartPower { p } => write!(f, "positive_part_power({p})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum H4Status {
    Holds { mu: f64 },
    Fails,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub h1: bool,
    pub h2: bool,
    pub p_used: f64,
    pub h3: bool,
    pub h4: H4Status,
    pub subcritical: bool,
}

// Log grid on [lo, hi] with `per_decade` points per decade.
fn log_grid(lo: f64, hi: f64, per_decade: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let m = ((b - a) * per_decade as f64).round() as usize;
    (0..=m).map(move |k| 10f64.powf(a + (b - a) * k as f64 / m as f64))
}

/// Decides (H1)–(H4) and subcriticality in dimension `dim`.
pub fn check_hypotheses(nl: &Nonlinearity, dim: usize) -> HypothesisReport {
    let crit = critical_exponent(dim);
    match nl {
        Nonlinearity::PowerSum { terms } => {
            let p_min = terms.first().map_or(f64::NAN, |t| t.exponent);
            let p_used = terms.last().map_or(f64::NAN, |t| t.exponent);
            let subcritical = p_used < crit;
            let (h3, h4) = if nl.all_positive() {
                (true, H4Status::Holds { mu: 1.0 + p_min })
            } else {
                // semi-decision: G > 0 somewhere on a log grid of ±s₀
                let h3 = log_grid(1e-3, 1e3, 50).any(|s| nl.G(s) > 0.0 || nl.G(-s) > 0.0);
                (h3, H4Status::Unknown)
            };
            HypothesisReport {
                h1: p_min > 1.0,
                h2: subcritical,
                p_used,
                h3,
                h4,
                subcritical,
            }
        }
        Nonlinearity::SaturatingCubic => HypothesisReport {
            h1: true,
            h2: true,
            // g is asymptotically linear; any p in ]1, crit[ works.
            p_used: 0.5 * (1.0 + crit),
            h3: true,
            h4: H4Status::Fails,
            subcritical: true,
        },
        Nonlinearity::PositivePartPower { p } => {
            let subcritical = *p < crit;
            HypothesisReport {
                h1: true,
                h2: subcritical,
                p_used: *p,
                h3: true,
                h4: H4Status::Holds { mu: p + 1.0 },
                subcritical,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaStar {
    /// `sup_{ν>0} 2G(ν)/ν²`, possibly `+∞`.
    pub value: f64,
    /// Whether the supremum is attained inside the search window.
    pub attained: bool,
    pub argmax: Option<f64>,
}

impl LambdaStar {
    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }

    /// Admissible `λ` lie strictly below `λ*` with margin `1e-9`.
    pub fn admits(&self, lambda: f64) -> bool {
        lambda > 0.0 && (self.is_infinite() || lambda < self.value - 1e-9)
    }
}

/// `λ* = sup_{ν>0} 2G(ν)/ν²` over `ν ∈ [1e-6, 1e6]`.
pub fn lambda_star(nl: &Nonlinearity) -> Result<LambdaStar> {
    if nl.superquadratic_leading_term() {
        return Ok(LambdaStar {
            value: f64::INFINITY,
            attained: false,
            argmax: None,
        });
    }
    let ratio = |log_nu: f64| {
        let nu = 10f64.powf(log_nu);
        2.0 * nl.G(nu) / (nu * nu)
    };
    const LO: f64 = -6.0;
    const HI: f64 = 6.0;
    let m = 2400;
    let logs: Vec<f64> = (0..=m)
        .map(|k| LO + (HI - LO) * k as f64 / m as f64)
        .collect();
    let (best, best_val) = logs.iter().enumerate().map(|(k, &l)| (k, ratio(l))).fold(
        (0, f64::NEG_INFINITY),
        |acc, (k, v)| if v > acc.1 { (k, v) } else { acc },
    );
    if !(best_val > 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "G <= 0 on every sampled ν for {nl}; (H3) fails"
        )));
    }
    if best == 0 || best == m {
        return Ok(LambdaStar {
            value: best_val,
            attained: false,
            argmax: None,
        });
    }
    let (x, v) = golden_max(ratio, logs[best - 1], logs[best + 1], 1e-12);
    Ok(LambdaStar {
        value: v.max(best_val),
        attained: true,
        argmax: Some(10f64.powf(x)),
    })
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + c.abs()) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// A radial profile `r ↦ V(r)`.
#[derive(Clone)]
pub struct RadialProfile {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    decays_at_infinity: bool,
}

impl RadialProfile {
    pub fn new(
        label: impl Into<String>,
        decays_at_infinity: bool,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
            decays_at_infinity,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }

    pub fn decays_at_infinity(&self) -> bool {
        self.decays_at_infinity
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("label", &self.label)
            .field("decays_at_infinity", &self.decays_at_infinity)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Potential {
    One,
    Radial(RadialProfile),
}

impl Potential {
    pub fn is_one(&self) -> bool {
        matches!(self, Self::One)
    }
}

/// Samples `V` on the grid, rejecting negative or identically zero potentials.
pub fn eval_potential(v: &Potential, grid: &Arc<RadialGrid>) -> Result<RadialField> {
    match v {
        Potential::One => Ok(RadialField::from_fn(grid, |_| 1.0)),
        Potential::Radial(profile) => {
            let field = RadialField::from_fn(grid, |r| profile.eval(r));
            let interior = &field.values()[..=grid.interior()];
            if let Some((i, x)) = interior
                .iter()
                .enumerate()
                .find(|(_, x)| !(**x >= 0.0) || !x.is_finite())
            {
                return Err(Error::NonAdmissiblePotential(format!(
                    "{} takes the value {x} at r = {}",
                    profile.label(),
                    grid.nodes()[i]
                )));
            }
            if interior.iter().all(|&x| x == 0.0) {
                return Err(Error::NonAdmissiblePotential(format!(
                    "{} vanishes on the whole grid",
                    profile.label()
                )));
            }
            Ok(field)
        }
    }
}
