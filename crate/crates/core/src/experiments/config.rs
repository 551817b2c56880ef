//! JSON experiment configuration and per-experiment validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

use crate::error::{invalid, Error, Result};
use crate::functions::TestFunction;
use crate::group::{Ball, GroupElement, GroupParams};
use crate::kernels::{SubordinationSpec, TrotterSpec};
use crate::potential::Potential;
use crate::sampling::QuadratureSpec;
use crate::spaces::{BallFamilySpec, SpaceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    HeatKernel,
    Rho,
    Norm,
    Hls,
    ThmMorrey,
    ThmWeak,
    ThmHoelder,
    FreeCase,
    Inequalities,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::HeatKernel => "heat-kernel",
            Self::Rho => "rho",
            Self::Norm => "norm",
            Self::Hls => "hls",
            Self::ThmMorrey => "thm-morrey",
            Self::ThmWeak => "thm-weak",
            Self::ThmHoelder => "thm-hoelder",
            Self::FreeCase => "free-case",
            Self::Inequalities => "inequalities",
        }
    }
}

/// Subordination window and resolution; `α` comes from the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubordinationWindow {
    pub s_min_factor: f64,
    pub s_max_factor: f64,
    pub nodes_per_decade: usize,
}

impl Default for SubordinationWindow {
    fn default() -> Self {
        Self {
            s_min_factor: 1e-4,
            s_max_factor: 1e4,
            nodes_per_decade: 8,
        }
    }
}

impl SubordinationWindow {
    pub fn spec(&self, alpha: f64) -> SubordinationSpec {
        SubordinationSpec {
            alpha,
            s_min_factor: self.s_min_factor,
            s_max_factor: self.s_max_factor,
            nodes_per_decade: self.nodes_per_decade,
        }
    }
}

/// Test-function family: kinds cycle bump, power, bump, indicator; scales
/// run over a geometric grid of `scales` points in `[scale_min, scale_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilySpec {
    pub count: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    pub scales: usize,
    /// Number of distinct centers (the identity plus random points).
    pub centers: usize,
    pub center_half_width: f64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            count: 32,
            scale_min: 0.5,
            scale_max: 2.0,
            scales: 4,
            centers: 4,
            center_half_width: 2.0,
        }
    }
}

/// Exponents of one free-case check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub p: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreeCaseSpec {
    pub morrey: Exponents,
    /// `p = 1` is implied.
    pub weak_kappa: f64,
    pub hoelder: Exponents,
    /// Exponents of the gradient (Morrey-lemma) check.
    pub lemma: Exponents,
}

impl Default for FreeCaseSpec {
    fn default() -> Self {
        Self {
            morrey: Exponents { p: 2.0, kappa: 0.25 },
            weak_kappa: 0.5,
            hoelder: Exponents { p: 2.0, kappa: 0.6 },
            lemma: Exponents { p: 3.0, kappa: 0.5 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InequalitySpec {
    /// Random instances per inequality.
    pub samples: usize,
    /// Random `(u, v)` pairs for the annulus comparability.
    pub annulus_samples: usize,
}

impl Default for InequalitySpec {
    fn default() -> Self {
        Self {
            samples: 1000,
            annulus_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatKernelSpec {
    pub times: Vec<f64>,
    pub points: Vec<GroupElement>,
}

impl Default for HeatKernelSpec {
    fn default() -> Self {
        Self {
            times: vec![0.1, 1.0, 10.0],
            points: vec![
                GroupElement::identity(1),
                GroupElement::h1(1.0, 0.0, 0.0),
                GroupElement::h1(0.0, 0.0, 1.0),
                GroupElement::h1(0.5, -0.5, 0.5),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RhoSpec {
    pub points: Vec<GroupElement>,
    pub tol: f64,
}

impl Default for RhoSpec {
    fn default() -> Self {
        Self {
            points: vec![
                GroupElement::identity(1),
                GroupElement::h1(1.0, 0.0, 0.0),
                GroupElement::h1(0.0, 0.0, 1.0),
                GroupElement::h1(3.0, 2.0, -1.0),
            ],
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormSpec {
    pub function: TestFunction,
    pub spaces: Vec<SpaceSpec>,
    /// Domain of the Lebesgue norms.
    pub domain: Ball,
}

impl Default for NormSpec {
    fn default() -> Self {
        Self {
            function: TestFunction::Bump {
                center: GroupElement::identity(1),
                width: 1.0,
            },
            spaces: vec![
                SpaceSpec {
                    p: 2.0,
                    ..SpaceSpec::new(crate::spaces::SpaceKind::Lebesgue)
                },
                SpaceSpec::morrey(2.0, 0.25, 0.0),
                SpaceSpec::weak_morrey(2.0, 0.25, 0.0),
                SpaceSpec::bmo(0.0),
                SpaceSpec::hoelder(0.5, 0.0),
            ],
            domain: Ball {
                center: GroupElement::identity(1),
                radius: 50.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub potential: Potential,
    pub alpha: f64,
    pub p: f64,
    /// Derived from `1/q = 1/p − α/Q` when absent; checked against it when given.
    pub q: Option<f64>,
    pub kappa: f64,
    pub theta: f64,
    /// Output-space damping exponents; `{θ, 2θ, 4θ}` when absent.
    pub theta_out: Option<Vec<f64>>,
    /// Smoothness exponent of the kernel; Hölder targets need `β < δ`.
    pub delta: f64,
    /// Fractions of the admissible `κ` range probed by the boundary scan.
    pub kappa_scan: Vec<f64>,
    /// Dilation factors of the scale-invariance check.
    pub dilations: Vec<f64>,
    pub functions: FamilySpec,
    pub balls: BallFamilySpec,
    pub subordination: SubordinationWindow,
    pub trotter: TrotterSpec,
    pub quadrature: QuadratureSpec,
    pub free_case: FreeCaseSpec,
    pub inequalities: InequalitySpec,
    pub heat_kernel: HeatKernelSpec,
    pub rho: RhoSpec,
    pub norm: NormSpec,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1,
            potential: Potential::Constant { c: 1.0 },
            alpha: 1.0,
            p: 2.0,
            q: None,
            kappa: 0.25,
            theta: 1.0,
            theta_out: None,
            delta: 1.0,
            kappa_scan: vec![0.5, 0.75, 0.9, 0.99],
            dilations: vec![0.25, 1.0, 4.0],
            functions: FamilySpec::default(),
            balls: BallFamilySpec::default(),
            subordination: SubordinationWindow::default(),
            trotter: TrotterSpec::default().with_steps(8),
            quadrature: QuadratureSpec::default(),
            free_case: FreeCaseSpec::default(),
            inequalities: InequalitySpec::default(),
            heat_kernel: HeatKernelSpec::default(),
            rho: RhoSpec::default(),
            norm: NormSpec::default(),
            seed: 1,
            output: None,
        }
    }
}

/// Exponents implied by a validated configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    pub q_dim: f64,
    pub q: f64,
    pub beta: f64,
}

fn inadmissible(msg: impl Into<String>) -> Error {
    Error::Inadmissible(msg.into())
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

impl ExperimentConfig {
    /// Defaults for one experiment.
    pub fn defaults_for(exp: Experiment) -> Self {
        let base = Self::default();
        match exp {
            Experiment::Hls | Experiment::FreeCase => Self {
                potential: Potential::Zero,
                theta: 0.0,
                ..base
            },
            Experiment::ThmWeak => Self { p: 1.0, kappa: 0.5, ..base },
            Experiment::ThmHoelder => Self { kappa: 0.6, ..base },
            Experiment::Inequalities => Self {
                potential: Potential::HomogeneousPower { a: 2.0, scale: 1.0 },
                ..base
            },
            _ => base,
        }
    }

    /// Experiment defaults overridden by the fields present in `json`.
    pub fn from_json(exp: Experiment, json: &str) -> Result<Self> {
        let mut base = serde_json::to_value(Self::defaults_for(exp))?;
        let patch: Value = serde_json::from_str(json)?;
        if !patch.is_object() {
            return Err(invalid("configuration must be a JSON object"));
        }
        merge(&mut base, patch);
        Ok(serde_json::from_value(base)?)
    }

    pub fn load(exp: Experiment, path: &Path) -> Result<Self> {
        Self::from_json(exp, &std::fs::read_to_string(path)?)
    }

    pub fn subordination_spec(&self) -> SubordinationSpec {
        self.subordination.spec(self.alpha)
    }

    /// `{θ, 2θ, 4θ}` unless configured.
    pub fn theta_sweep(&self) -> Vec<f64> {
        self.theta_out
            .clone()
            .unwrap_or_else(|| vec![self.theta, 2.0 * self.theta, 4.0 * self.theta])
    }

    fn check_common(&self) -> Result<f64> {
        let q_dim = GroupParams::new(self.n)?.q_f64();
        self.potential.validate()?;
        self.trotter.validate()?;
        self.quadrature.validate()?;
        self.balls.validate()?;
        self.subordination_spec().validate(q_dim)?;
        if self.functions.count == 0 || self.functions.centers == 0 {
            return Err(invalid("test family needs at least one function and one center"));
        }
        if !(self.functions.scale_min > 0.0 && self.functions.scale_min <= self.functions.scale_max) {
            return Err(invalid("test family scales must satisfy 0 < scale_min <= scale_max"));
        }
        if !(self.theta >= 0.0) || self.theta_sweep().iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("damping exponents must be nonnegative"));
        }
        if self.dilations.iter().any(|a| !(*a > 0.0)) {
            return Err(invalid("dilation factors must be positive"));
        }
        Ok(q_dim)
    }

    /// `q` from `1/q = 1/p − α/Q`, checked against a configured value.
    fn sobolev_q(&self, p: f64, q_dim: f64) -> Result<f64> {
        let alpha = self.alpha;
        if !(p > 1.0 && p < q_dim / alpha) {
            return Err(inadmissible(format!("need 1 < p < Q/alpha = {}, got p = {p}", q_dim / alpha)));
        }
        let q = 1.0 / (1.0 / p - alpha / q_dim);
        self.check_q(q)?;
        Ok(q)
    }

    fn check_q(&self, q: f64) -> Result<()> {
        if let Some(given) = self.q {
            if (given - q).abs() > 1e-9 * q {
                return Err(inadmissible(format!("q = {given} does not satisfy the Sobolev relation (expected {q})")));
            }
        }
        Ok(())
    }

    fn nonzero_potential(&self) -> Result<()> {
        if self.potential.is_zero() {
            return Err(inadmissible("this experiment needs a nonzero potential; use free-case for V = 0"));
        }
        Ok(())
    }

    /// Validates the hypotheses of `exp` and returns the derived exponents.
    pub fn validate(&self, exp: Experiment) -> Result<Derived> {
        let q_dim = self.check_common()?;
        let weak_q = q_dim / (q_dim - self.alpha);
        let d = |q: f64, beta: f64| Derived { q_dim, q, beta };
        match exp {
            Experiment::HeatKernel | Experiment::Rho | Experiment::Norm => Ok(d(f64::NAN, 0.0)),
            Experiment::Inequalities => {
                if self.inequalities.samples == 0 || self.inequalities.annulus_samples == 0 {
                    return Err(invalid("inequality sample counts must be positive"));
                }
                Ok(d(f64::NAN, 0.0))
            }
            Experiment::Hls => {
                if self.p == 1.0 {
                    self.check_q(weak_q)?;
                    Ok(d(weak_q, 0.0))
                } else {
                    Ok(d(self.sobolev_q(self.p, q_dim)?, 0.0))
                }
            }
            Experiment::ThmMorrey => {
                self.nonzero_potential()?;
                let q = self.sobolev_q(self.p, q_dim)?;
                if !(self.kappa > 0.0 && self.kappa < self.p / q) {
                    return Err(inadmissible(format!("need 0 < kappa < p/q = {}, got {}", self.p / q, self.kappa)));
                }
                Ok(d(q, 0.0))
            }
            Experiment::ThmWeak => {
                self.nonzero_potential()?;
                if self.p != 1.0 {
                    return Err(inadmissible("the weak-type theorem needs p = 1"));
                }
                self.check_q(weak_q)?;
                if !(self.kappa > 0.0 && self.kappa < 1.0 / weak_q) {
                    return Err(inadmissible(format!("need 0 < kappa < 1/q = {}, got {}", 1.0 / weak_q, self.kappa)));
                }
                Ok(d(weak_q, 0.0))
            }
            Experiment::ThmHoelder => {
                self.nonzero_potential()?;
                let q = self.sobolev_q(self.p, q_dim)?;
                let beta = hoelder_beta(self.p, q, self.kappa, q_dim)?;
                if beta >= self.delta {
                    return Err(inadmissible(format!(
                        "beta = {beta} is not below the kernel smoothness delta = {}",
                        self.delta
                    )));
                }
                Ok(d(q, beta))
            }
            Experiment::FreeCase => {
                if !self.potential.is_zero() {
                    return Err(inadmissible("the free case needs V = 0"));
                }
                let fc = &self.free_case;
                let q = self.sobolev_q(fc.morrey.p, q_dim)?;
                if !(fc.morrey.kappa > 0.0 && fc.morrey.kappa < fc.morrey.p / q) {
                    return Err(inadmissible("free Morrey check needs 0 < kappa < p/q"));
                }
                if !(fc.weak_kappa > 0.0 && fc.weak_kappa < 1.0 / weak_q) {
                    return Err(inadmissible("free weak check needs 0 < kappa < 1/q"));
                }
                let qh = 1.0 / (1.0 / fc.hoelder.p - self.alpha / q_dim);
                if !(fc.hoelder.p > 1.0 && fc.hoelder.p < q_dim / self.alpha) {
                    return Err(inadmissible("free Hölder check needs 1 < p < Q/alpha"));
                }
                hoelder_beta(fc.hoelder.p, qh, fc.hoelder.kappa, q_dim)?;
                lemma_beta(fc.lemma, q_dim)?;
                Ok(d(q, 0.0))
            }
        }
    }
}

/// `β = Q(κ/p − 1/q)` for `p/q ≤ κ < 1`.
pub fn hoelder_beta(p: f64, q: f64, kappa: f64, q_dim: f64) -> Result<f64> {
    if !(kappa >= p / q * (1.0 - 1e-12) && kappa < 1.0) {
        return Err(inadmissible(format!("need p/q = {} <= kappa < 1, got {kappa}", p / q)));
    }
    let beta = (q_dim * (kappa / p - 1.0 / q)).max(0.0);
    if beta > 1.0 {
        return Err(inadmissible(format!("beta = {beta} exceeds 1")));
    }
    Ok(beta)
}

/// `β = 1 − (1 − κ)Q/p` of the gradient check, required to lie in `(0, 1]`.
pub fn lemma_beta(e: Exponents, q_dim: f64) -> Result<f64> {
    if !(e.p >= 1.0 && (0.0..1.0).contains(&e.kappa)) {
        return Err(inadmissible("gradient check needs p >= 1 and 0 <= kappa < 1"));
    }
    let beta = 1.0 - (1.0 - e.kappa) * q_dim / e.p;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(inadmissible(format!("gradient check needs 0 < 1 - (1-kappa)Q/p <= 1, got {beta}")));
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_overrides_defaults() {
        let cfg = ExperimentConfig::from_json(Experiment::ThmMorrey, r#"{"kappa": 0.3, "balls": {"count": 8}}"#).unwrap();
        assert_eq!(cfg.kappa, 0.3);
        assert_eq!(cfg.balls.count, 8);
        assert_eq!(cfg.balls.r_max, 100.0);
        assert_eq!(cfg.p, 2.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(Experiment::Hls, r#"{"kapa": 0.3}"#).is_err());
    }

    #[test]
    fn critical_sobolev_exponent_is_rejected() {
        let cfg = ExperimentConfig::from_json(Experiment::Hls, r#"{"alpha": 2.0, "p": 2.0}"#).unwrap();
        assert!(matches!(cfg.validate(Experiment::Hls), Err(Error::Inadmissible(_))));
    }

    #[test]
    fn morrey_hypotheses() {
        let cfg = ExperimentConfig::defaults_for(Experiment::ThmMorrey);
        let d = cfg.validate(Experiment::ThmMorrey).unwrap();
        assert!((d.q - 4.0).abs() < 1e-12);
        let bad = ExperimentConfig { kappa: 0.5, ..cfg };
        assert!(bad.validate(Experiment::ThmMorrey).is_err());
    }

    #[test]
    fn weak_hypotheses() {
        let cfg = ExperimentConfig::defaults_for(Experiment::ThmWeak);
        let d = cfg.validate(Experiment::ThmWeak).unwrap();
        assert!((d.q - 4.0 / 3.0).abs() < 1e-12);
        let bad = ExperimentConfig { kappa: 0.75, ..cfg };
        assert!(bad.validate(Experiment::ThmWeak).is_err());
    }

    #[test]
    fn hoelder_exponent() {
        let cfg = ExperimentConfig::defaults_for(Experiment::ThmHoelder);
        let d = cfg.validate(Experiment::ThmHoelder).unwrap();
        assert!((d.beta - 0.2).abs() < 1e-12);
        let at_boundary = ExperimentConfig { kappa: 0.5, ..cfg.clone() };
        assert_eq!(at_boundary.validate(Experiment::ThmHoelder).unwrap().beta, 0.0);
        let rough = ExperimentConfig { delta: 0.1, ..cfg };
        assert!(rough.validate(Experiment::ThmHoelder).is_err());
    }

    #[test]
    fn lemma_exponent() {
        let b = lemma_beta(Exponents { p: 3.0, kappa: 0.5 }, 4.0).unwrap();
        assert!((b - 1.0 / 3.0).abs() < 1e-12);
    }
}
