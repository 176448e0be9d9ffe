//! Run configuration: one TOML section per module (a JSON file with the same
//! structure is accepted when the path ends in `.json`).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::continuation::lambda_range;
use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::nonhomogeneous::{cosine_profile, probe_profile, ForcingTerm, ThresholdConfig};
use crate::nonlinearity::{
    check_hypotheses, eval_potential, Nonlinearity, Potential, RadialProfile,
};
use crate::radial::{make_grid, DomainKind, RadialField, RadialGrid};
use crate::solvers::MountainPassConfig;

/// Problem family selected by `[problem] mode`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Autonomous,
    Weighted,
    Forced,
}

/// Named radial potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    One,
    /// `V(r) = base + amplitude · exp(−(r/width)²)`.
    Gaussian {
        base: f64,
        amplitude: f64,
        width: f64,
    },
}

impl PotentialSpec {
    pub fn build(&self) -> Result<Potential> {
        match *self {
            Self::One => Ok(Potential::One),
            Self::Gaussian {
                base,
                amplitude,
                width,
            } => {
                if !(width > 0.0) || !base.is_finite() || !amplitude.is_finite() {
                    return Err(Error::NonAdmissiblePotential(format!(
                        "gaussian potential needs finite parameters and width > 0 (got {base}, {amplitude}, {width})"
                    )));
                }
                let label = format!("{base} + {amplitude}·exp(-(r/{width})²)");
                Ok(Potential::Radial(RadialProfile::new(
                    label,
                    base == 0.0,
                    move |r| base + amplitude * (-(r / width).powi(2)).exp(),
                )))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub dim: usize,
    pub radius: f64,
    pub interior: usize,
    pub domain: DomainKind,
    pub mode: ModeSpec,
    pub nonlinearity: Nonlinearity,
    pub potential: PotentialSpec,
    /// `λ` for `solve` (the forcing amplitude `α` in forced mode).
    pub lambda: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            dim: 3,
            radius: 20.0,
            interior: 2000,
            domain: DomainKind::TruncatedWholeSpace,
            mode: ModeSpec::Autonomous,
            nonlinearity: Nonlinearity::PowerSum {
                terms: vec![crate::nonlinearity::PowerTerm {
                    coeff: 1.0,
                    exponent: 3.0,
                }],
            },
            potential: PotentialSpec::One,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub lambda_start: f64,
    pub lambda_stop: f64,
    pub lambda_step: f64,
    pub warm: bool,
    /// Reference `λ0` of the transfer, limit and scaling checks.
    pub lambda0: f64,
    /// Neighbours per side in the branch limit check.
    pub neighbours: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            lambda_start: 0.5,
            lambda_stop: 2.0,
            lambda_step: 0.05,
            warm: true,
            lambda0: 1.0,
            neighbours: 4,
        }
    }
}

impl SweepSpec {
    pub fn lambda_grid(&self) -> Result<Vec<f64>> {
        lambda_range(self.lambda_start, self.lambda_stop, self.lambda_step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSpec {
    /// `cos(πr/R)`, sign-changing.
    Cosine,
    /// `cos(πr/2R)`, positive.
    HalfCosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcedSpec {
    pub radius: f64,
    pub interior: usize,
    pub p: f64,
    pub q: f64,
    pub profile: ProfileSpec,
    /// Limit-study amplitudes in units of `β`, strictly decreasing.
    pub amplitude_factors: Vec<f64>,
}

impl Default for ForcedSpec {
    fn default() -> Self {
        Self {
            radius: 1.0,
            interior: 400,
            p: 3.0,
            q: 2.0,
            profile: ProfileSpec::Cosine,
            amplitude_factors: vec![1.0, 0.5, 0.25, 0.125],
        }
    }
}

impl ForcedSpec {
    pub fn grid(&self, dim: usize) -> Result<Arc<RadialGrid>> {
        make_grid(dim, self.radius, self.interior, DomainKind::Ball)
    }

    /// The unit-`L^q` forcing profile with amplitude 0.
    pub fn forcing(&self, grid: &Arc<RadialGrid>) -> Result<ForcingTerm> {
        let raw = match self.profile {
            ProfileSpec::Cosine => cosine_profile(grid),
            ProfileSpec::HalfCosine => probe_profile(grid),
        };
        ForcingTerm::new(&raw, self.q, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceSpec {
    pub oracle_lambdas: Vec<f64>,
    pub scaling_lambdas: Vec<f64>,
    /// Random direction pairs per mode in the gradient-consistency check.
    pub gradient_pairs: usize,
}

impl Default for AcceptanceSpec {
    fn default() -> Self {
        Self {
            oracle_lambdas: vec![0.5, 1.0, 2.0],
            scaling_lambdas: vec![0.5, 0.75, 1.5, 2.0],
            gradient_pairs: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every random probe.
    pub seed: u64,
    pub out: PathBuf,
    pub problem: ProblemSpec,
    pub solver: MountainPassConfig,
    pub sweep: SweepSpec,
    pub forced: ForcedSpec,
    pub threshold: ThresholdConfig,
    pub acceptance: AcceptanceSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("out"),
            problem: ProblemSpec::default(),
            solver: MountainPassConfig::default(),
            sweep: SweepSpec::default(),
            forced: ForcedSpec::default(),
            threshold: ThresholdConfig::default(),
            acceptance: AcceptanceSpec::default(),
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validated()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validated()
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if is_json(path) {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Re-checks every module precondition that does not need a solve.
    pub fn validated(mut self) -> Result<Self> {
        self.problem.nonlinearity = self.problem.nonlinearity.clone().validated()?;
        self.solver.validate()?;
        self.threshold.validate()?;
        let pr = &self.problem;
        if pr.mode == ModeSpec::Forced {
            self.forced_problem_spec_check()?;
        } else {
            let grid = self.grid()?;
            if !check_hypotheses(&pr.nonlinearity, pr.dim).subcritical {
                return Err(Error::HypothesisViolated(format!(
                    "{} is not subcritical for N = {}",
                    pr.nonlinearity, pr.dim
                )));
            }
            eval_potential(&pr.potential.build()?, &grid)?;
        }
        let _ = self.sweep.lambda_grid()?;
        if self.sweep.neighbours == 0 {
            return Err(Error::Config("sweep.neighbours must be at least 1".into()));
        }
        let f = &self.forced.amplitude_factors;
        if f.is_empty() || f.iter().any(|a| !(*a > 0.0)) || f.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config(
                "forced.amplitude_factors must be positive and strictly decreasing".into(),
            ));
        }
        Ok(self)
    }

    fn forced_problem_spec_check(&self) -> Result<()> {
        let grid = self.forced.grid(self.problem.dim)?;
        let crit = grid.critical_exponent();
        let p = self.forced.p;
        if !(p > 1.0 && p < crit) {
            return Err(Error::HypothesisViolated(format!(
                "forced.p = {p} must lie in ]1, {crit}["
            )));
        }
        self.forced.forcing(&grid)?;
        Ok(())
    }

    /// The `[problem]` grid.
    pub fn grid(&self) -> Result<Arc<RadialGrid>> {
        let pr = &self.problem;
        make_grid(pr.dim, pr.radius, pr.interior, pr.domain)
    }

    /// The `[problem]` λ-family problem on `grid`.
    pub fn lambda_problem(&self, grid: &Arc<RadialGrid>) -> Result<Problem> {
        let pr = &self.problem;
        match pr.mode {
            ModeSpec::Autonomous => Ok(Problem::autonomous(grid, pr.nonlinearity.clone())),
            ModeSpec::Weighted => {
                Problem::weighted(grid, pr.nonlinearity.clone(), pr.potential.build()?)
            }
            ModeSpec::Forced => Err(Error::Config(
                "this command needs mode = \"autonomous\" or \"weighted\"".into(),
            )),
        }
    }

    /// `α·profile` on the forced grid.
    pub fn forcing_field(&self, grid: &Arc<RadialGrid>, alpha: f64) -> Result<RadialField> {
        Ok(self.forced.forcing(grid)?.with_amplitude(alpha)?.field())
    }
}

/// The bundled reference configuration.
pub const REFERENCE_TOML: &str = include_str!("../reference.toml");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_parses_to_the_defaults() {
        let cfg = RunConfig::from_toml(REFERENCE_TOML).unwrap();
        let expected = RunConfig {
            threshold: ThresholdConfig {
                alpha_max_factor: 256.0,
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(cfg, expected);
    }

    #[test]
    fn toml_round_trip_is_idempotent() {
        let cfg = RunConfig::from_toml(REFERENCE_TOML).unwrap();
        let once = cfg.to_toml().unwrap();
        let twice = RunConfig::from_toml(&once).unwrap().to_toml().unwrap();
        assert_eq!(once, twice);
        assert_eq!(RunConfig::from_toml(&once).unwrap(), cfg);
    }

    #[test]
    fn json_matches_toml() {
        let cfg = RunConfig::from_toml(REFERENCE_TOML).unwrap();
        let json = cfg.to_json().unwrap();
        assert_eq!(RunConfig::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn validation_failures() {
        for bad in [
            "[problem]\ninterior = 4",
            "[problem]\nnonlinearity = { family = \"power_sum\", terms = [{ coeff = 1.0, exponent = 5.0 }] }",
            "[problem]\nnonlinearity = { family = \"power_sum\", terms = [] }",
            "[problem]\nmode = \"weighted\"\npotential = { kind = \"gaussian\", base = -1.0, amplitude = 0.0, width = 1.0 }",
            "[solver]\npath_points = 3",
            "[sweep]\nlambda_step = 0.0",
            "[forced]\nq = 1.0\n[problem]\nmode = \"forced\"",
            "[forced]\namplitude_factors = [0.5, 1.0]",
            "[threshold]\nwidth_factor = 0.0",
            "unknown_key = 3",
            "[solver]\nbogus = 1",
        ] {
            assert!(RunConfig::from_toml(bad).is_err(), "accepted: {bad}");
        }
    }

    #[test]
    fn gaussian_potential() {
        let spec = PotentialSpec::Gaussian {
            base: 1.0,
            amplitude: 0.5,
            width: 2.0,
        };
        let Potential::Radial(v) = spec.build().unwrap() else {
            panic!("expected a radial potential")
        };
        assert!((v.eval(0.0) - 1.5).abs() < 1e-15);
        assert!(!v.decays_at_infinity());
    }
}
