//! Lebesgue, Morrey, BMO and Hölder norm estimators with witness balls.
//!
//! Ball functionals are computed from a weighted node list per ball. Balls
//! centered at the symmetry center of a field use an exact polar rule in
//! `(ρ, θ)`; radial functions whose support lies inside or outside a ball are
//! handled in closed form; everything else uses the configured unit-ball rule.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{invalid, Result};
use crate::exec;
use crate::functions::{ScalarField, TestFunction};
use crate::group::{default_fd_step, horizontal_gradient, sphere_area, unit_ball_volume, Ball, GroupElement, GroupParams};
use crate::kernels::fractional::FractionalField;
use crate::potential::{Potential, RhoField};
use crate::quad::GaussLegendre;
use crate::sampling::{log_uniform, random_point_in_ball, random_point_in_box, rng_for, QuadratureSpec, UnitBallRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Lebesgue,
    WeakLebesgue,
    Morrey,
    WeakMorrey,
    Bmo,
    Hoelder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub beta: f64,
    /// Potential defining `ρ`; `None` means `ρ ≡ ∞`.
    #[serde(default)]
    pub rho_source: Option<Potential>,
}

fn one() -> f64 {
    1.0
}

impl SpaceSpec {
    pub fn new(kind: SpaceKind) -> Self {
        Self {
            kind,
            p: 1.0,
            kappa: 0.0,
            theta: 0.0,
            beta: 0.0,
            rho_source: None,
        }
    }

    pub fn morrey(p: f64, kappa: f64, theta: f64) -> Self {
        Self {
            p,
            kappa,
            theta,
            ..Self::new(SpaceKind::Morrey)
        }
    }

    pub fn weak_morrey(p: f64, kappa: f64, theta: f64) -> Self {
        Self {
            p,
            kappa,
            theta,
            ..Self::new(SpaceKind::WeakMorrey)
        }
    }

    pub fn bmo(theta: f64) -> Self {
        Self {
            theta,
            ..Self::new(SpaceKind::Bmo)
        }
    }

    pub fn hoelder(beta: f64, theta: f64) -> Self {
        Self {
            beta,
            theta,
            ..Self::new(SpaceKind::Hoelder)
        }
    }

    pub fn with_rho(self, v: Potential) -> Self {
        Self { rho_source: Some(v), ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(invalid(format!("p must be at least 1, got {}", self.p)));
        }
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(invalid(format!("kappa must lie in [0, 1), got {}", self.kappa)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(invalid(format!("theta must be nonnegative, got {}", self.theta)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if let Some(v) = &self.rho_source {
            v.validate()?;
        }
        Ok(())
    }

    /// `ρ` for this space.
    pub fn rho_field(&self, n: usize) -> Result<RhoField> {
        match self.rho_source {
            None | Some(Potential::Zero) => Ok(RhoField::free()),
            Some(v) => RhoField::new(v, n, 1e-8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    pub witness: Ball,
    pub balls_tested: usize,
    /// Value on the first half of the ball family divided by the full value.
    pub convergence: f64,
    /// Supremum over balls in the top radius decade divided by the supremum
    /// over the remaining balls.
    pub scale_growth: f64,
    /// `convergence ≥ 0.9` and `scale_growth ≤ 1.1`.
    pub stabilized: bool,
}

/// Symmetry information used to pick exact quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct Symmetry {
    /// The field depends only on `(|z|, t)` of `center^{-1}u`.
    pub center: GroupElement,
    /// The field depends only on `|center^{-1}u|`.
    pub radial: bool,
    /// Characteristic length.
    pub scale: f64,
    /// Radius outside which a radial field vanishes.
    pub support: Option<f64>,
    /// Radii where a radial profile jumps or has a kink.
    pub breaks: Vec<f64>,
}

/// A field whose norms can be estimated.
pub trait NormTarget: ScalarField {
    fn symmetry(&self) -> Option<Symmetry> {
        None
    }
}

fn profile_breaks(f: &TestFunction, out: &mut Vec<f64>) {
    match f {
        TestFunction::Indicator { ball } => out.push(ball.radius),
        TestFunction::Power { gamma, cutoff, radius, .. } => {
            out.extend(radius.iter().copied());
            if let Some(c) = cutoff {
                if *gamma != 0.0 {
                    out.push(c.powf(-1.0 / gamma));
                }
            }
        }
        TestFunction::Sum { terms } => terms.iter().for_each(|t| profile_breaks(t, out)),
        TestFunction::Scaled { inner, .. } => profile_breaks(inner, out),
        _ => {}
    }
}

impl NormTarget for TestFunction {
    fn symmetry(&self) -> Option<Symmetry> {
        let center = self.radial_center()?.clone();
        let mut breaks = Vec::new();
        profile_breaks(self, &mut breaks);
        let support = match self {
            TestFunction::Bump { .. } => None,
            _ => self.effective_support(),
        };
        Some(Symmetry {
            center,
            radial: true,
            scale: self.scale(),
            support,
            breaks,
        })
    }
}

impl NormTarget for FractionalField {
    fn symmetry(&self) -> Option<Symmetry> {
        Some(Symmetry {
            center: self.center().clone(),
            radial: false,
            scale: self.length(),
            support: None,
            breaks: Vec::new(),
        })
    }
}

/// `|∇_{H^n} f|` by central differences along the horizontal fields.
pub struct GradientNorm<'a, F: NormTarget + ?Sized> {
    pub f: &'a F,
}

impl<F: NormTarget + ?Sized> ScalarField for GradientNorm<'_, F> {
    fn eval(&self, u: &GroupElement) -> f64 {
        let g = horizontal_gradient(self.f, u, default_fd_step(u)).expect("positive step");
        g.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl<F: NormTarget + ?Sized> NormTarget for GradientNorm<'_, F> {
    fn symmetry(&self) -> Option<Symmetry> {
        self.f.symmetry().map(|s| Symmetry {
            radial: false,
            support: None,
            ..s
        })
    }
}

/// Weighted nodes `(value, weight)` approximating `∫_B g`.
#[derive(Debug, Clone, Default)]
pub struct Nodes {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Nodes {
    fn push(&mut self, v: f64, w: f64) {
        self.values.push(v);
        self.weights.push(w);
    }
}

/// `∫_{−π/2}^{π/2} cos^{n−1}θ dθ`.
fn theta_mass(n: usize) -> f64 {
    let n = n as f64;
    PI.sqrt() * gamma(n / 2.0) / gamma((n + 1.0) / 2.0)
}

fn radial_panels(r: f64, floor: f64, breaks: &[f64]) -> Vec<f64> {
    let mut cuts = vec![0.0, r];
    let mut x = r;
    while x > floor {
        x *= 0.5;
        cuts.push(x);
    }
    cuts.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < r));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * r);
    cuts
}

/// Polar rule on `B(center, r)` for a field with the given symmetry:
/// `dV = |S^{2n−1}| ρ^{Q−1} cos^{n−1}θ dρ dθ` with `z = ρ√cos θ ω`, `t = ρ² sin θ`.
fn centered_nodes<F: NormTarget + ?Sized>(f: &F, sym: &Symmetry, r: f64, out: &mut Nodes) {
    let n = sym.center.n();
    let q = (2 * n + 2) as i32;
    let area = sphere_area(n);
    let gl = GaussLegendre::new(8);
    let thetas: Vec<(f64, f64)> = if sym.radial {
        vec![(0.0, theta_mass(n))]
    } else {
        GaussLegendre::new(12)
            .mapped(0.0, FRAC_PI_2)
            .map(|(th, w)| (th, 2.0 * w * th.cos().powi(n as i32 - 1)))
            .collect()
    };
    let cuts = radial_panels(r, 1e-6 * r.min(sym.scale), &sym.breaks);
    let mut coords = vec![0.0; 2 * n + 1];
    for pair in cuts.windows(2) {
        for (rho, wr) in gl.mapped(pair[0], pair[1]) {
            for &(th, wt) in &thetas {
                coords[0] = rho * th.cos().sqrt();
                coords[2 * n] = rho * rho * th.sin();
                let u = sym.center.mul(&GroupElement::from_coords(&coords).expect("finite"));
                out.push(f.eval(&u), area * wr * rho.powi(q - 1) * wt);
            }
        }
    }
}

/// Polar rule about the symmetry center for an off-center ball of `H^1`:
/// the inscribed ball `B(c, r − |c^{-1}u₀|)` exactly, the rest of `B` in
/// `(ρ, θ, φ)` with a membership test. Keeps singular and discontinuous
/// radial profiles away from the nodes of the ball's own rule.
fn shell_nodes<F: NormTarget + ?Sized>(f: &F, sym: &Symmetry, ball: &Ball, dc: f64, out: &mut Nodes) {
    let r = ball.radius;
    let inner = (r - dc).max(0.0);
    if inner > 0.0 {
        centered_nodes(f, sym, inner, out);
    }
    let lo = (dc - r).max(inner);
    let hi = dc + r;
    let floor = (1e-6 * hi).max(lo);
    let mut cuts = vec![lo, hi];
    let mut x = hi;
    while 0.5 * x > floor {
        x *= 0.5;
        cuts.push(x);
    }
    cuts.extend(sym.breaks.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * hi);
    let gl = GaussLegendre::new(8);
    let thetas: Vec<(f64, f64)> = GaussLegendre::new(16).mapped(-FRAC_PI_2, FRAC_PI_2).collect();
    let k_phi = 16;
    let dphi = 2.0 * PI / k_phi as f64;
    for pair in cuts.windows(2) {
        for (rho, wr) in gl.mapped(pair[0], pair[1]) {
            for &(th, wt) in &thetas {
                let rz = rho * th.cos().max(0.0).sqrt();
                let t = rho * rho * th.sin();
                for j in 0..k_phi {
                    let phi = (j as f64 + 0.5) * dphi;
                    let u = sym.center.mul(&GroupElement::h1(rz * phi.cos(), rz * phi.sin(), t));
                    if ball.center.dist(&u) < r {
                        out.push(f.eval(&u), wr * wt * dphi * rho.powi(3));
                    }
                }
            }
        }
    }
}

/// Node list for `∫_B g` with `g` the target field.
pub fn ball_nodes<F: NormTarget + ?Sized>(f: &F, ball: &Ball, rule: &UnitBallRule) -> Nodes {
    let mut out = Nodes::default();
    if let Some(sym) = f.symmetry() {
        let dc = sym.center.dist(&ball.center);
        let r = ball.radius;
        if dc <= 1e-12 * r {
            centered_nodes(f, &sym, r, &mut out);
            return out;
        }
        if let (true, Some(s)) = (sym.radial, sym.support) {
            let vol = ball.volume();
            if dc >= r + s {
                out.push(0.0, vol);
                return out;
            }
            if dc + s <= r {
                centered_nodes(f, &sym, s, &mut out);
                let inner: f64 = out.weights.iter().sum();
                out.push(0.0, (vol - inner).max(0.0));
                return out;
            }
        }
        if sym.radial && sym.center.n() == 1 && dc < 2.0 * r {
            shell_nodes(f, &sym, ball, dc, &mut out);
            return out;
        }
    }
    let q = (2 * ball.center.n() + 2) as i32;
    let scale = ball.radius.powi(q);
    for (i, &w) in rule.weights().iter().enumerate() {
        let node = GroupElement::from_coords(rule.node_coords(i)).expect("valid node");
        let u = ball.center.mul(&node.dilate(ball.radius));
        out.push(f.eval(&u), w * scale);
    }
    out
}

/// Per-ball quantities from which every ball functional is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallStat {
    pub volume: f64,
    /// `∫_B |f|^p`.
    pub power_integral: f64,
    /// `sup_λ λ |{u ∈ B : |f(u)| > λ}|^{1/p}`.
    pub weak: f64,
    /// `f_B`.
    pub mean: f64,
    /// `∫_B |f − f_B|`.
    pub oscillation: f64,
}

impl BallStat {
    pub fn from_nodes(nodes: &Nodes, volume: f64, p: f64) -> Self {
        let w: &[f64] = &nodes.weights;
        let v: &[f64] = &nodes.values;
        let mass: f64 = w.iter().sum();
        let mean = if mass > 0.0 {
            v.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / mass
        } else {
            0.0
        };
        let oscillation = v.iter().zip(w).map(|(x, w)| (x - mean).abs() * w).sum();
        let power_integral = v.iter().zip(w).map(|(x, w)| x.abs().powf(p) * w).sum();
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
        // Values whose p-th power underflows are zero in both functionals.
        let floor = f64::MIN_POSITIVE.powf(1.0 / p);
        let mut cum = 0.0;
        let mut weak: f64 = 0.0;
        for &i in order.iter().take_while(|&&i| v[i].abs() >= floor) {
            cum += w[i];
            weak = weak.max(v[i].abs() * cum.powf(1.0 / p));
        }
        Self {
            volume,
            power_integral,
            weak,
            mean,
            oscillation,
        }
    }
}

/// [`BallStat`]s of `f` at exponent `p` over `balls`.
pub fn ball_stats<F: NormTarget + ?Sized>(f: &F, p: f64, balls: &[Ball], quad: &QuadratureSpec) -> Result<Vec<BallStat>> {
    if balls.is_empty() {
        return Err(invalid("ball family is empty"));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be at least 1, got {p}")));
    }
    let rule = UnitBallRule::new(GroupParams::new(balls[0].center.n())?, quad)?;
    Ok(exec::map_slice(balls, |b| BallStat::from_nodes(&ball_nodes(f, b, &rule), b.volume(), p)))
}

/// `(1 + r/ρ)^{−θ}`.
pub fn damping(r: f64, rho: f64, theta: f64) -> f64 {
    if theta == 0.0 || rho.is_infinite() {
        1.0
    } else {
        (1.0 + r / rho).powf(-theta)
    }
}

/// The ball functional of a Morrey-type space (before taking the supremum).
pub fn ball_functional(spec: &SpaceSpec, stat: &BallStat, ball: &Ball, rho: f64) -> Result<f64> {
    let d = damping(ball.radius, rho, spec.theta);
    let q = (2 * ball.center.n() + 2) as f64;
    let vol = stat.volume;
    Ok(match spec.kind {
        SpaceKind::Morrey => d * (vol.powf(-spec.kappa) * stat.power_integral).powf(1.0 / spec.p),
        SpaceKind::WeakMorrey => d * vol.powf(-spec.kappa / spec.p) * stat.weak,
        SpaceKind::Bmo => d * stat.oscillation / vol,
        SpaceKind::Hoelder => d * vol.powf(-1.0 - spec.beta / q) * stat.oscillation,
        SpaceKind::Lebesgue | SpaceKind::WeakLebesgue => {
            return Err(invalid("Lebesgue norms are not ball suprema"));
        }
    })
}

/// Supremum report over per-ball values (in family order).
pub fn report_from_values(values: &[f64], balls: &[Ball]) -> Result<NormReport> {
    if values.is_empty() || values.len() != balls.len() {
        return Err(invalid("need one value per ball"));
    }
    let argmax = |vals: &[f64]| {
        vals.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
    };
    let (wi, value) = argmax(values);
    let half = values.len().div_ceil(2);
    let (_, half_value) = argmax(&values[..half]);
    let convergence = if value > 0.0 { half_value / value } else { 1.0 };
    let r_top = balls.iter().map(|b| b.radius).fold(0.0, f64::max) / 10.0;
    let (mut top, mut rest) = (0.0f64, 0.0f64);
    for (v, b) in values.iter().zip(balls) {
        if b.radius >= r_top {
            top = top.max(*v);
        } else {
            rest = rest.max(*v);
        }
    }
    let scale_growth = if rest > 0.0 {
        top / rest
    } else if top > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(NormReport {
        value,
        witness: balls[wi].clone(),
        balls_tested: balls.len(),
        convergence,
        scale_growth,
        stabilized: convergence >= 0.9 && scale_growth <= 1.1,
    })
}

/// Norm report from precomputed stats and `ρ` at the ball centers.
pub fn norm_from_stats(spec: &SpaceSpec, stats: &[BallStat], balls: &[Ball], rho: &[f64]) -> Result<NormReport> {
    spec.validate()?;
    if stats.len() != balls.len() || rho.len() != balls.len() {
        return Err(invalid("stats, balls and rho must have equal length"));
    }
    let values = stats
        .iter()
        .zip(balls)
        .zip(rho)
        .map(|((s, b), &r)| ball_functional(spec, s, b, r))
        .collect::<Result<Vec<_>>>()?;
    report_from_values(&values, balls)
}

/// `ρ` at every ball center.
pub fn rho_at_centers(rho: &RhoField, balls: &[Ball]) -> Result<Vec<f64>> {
    let centers: Vec<GroupElement> = balls.iter().map(|b| b.center.clone()).collect();
    rho.rho_many(&centers)
}

/// Norm of `f` in the ball-supremum space `spec` over `balls`.
pub fn space_norm<F: NormTarget + ?Sized>(f: &F, spec: &SpaceSpec, rho: &RhoField, balls: &[Ball], quad: &QuadratureSpec) -> Result<NormReport> {
    spec.validate()?;
    let stats = ball_stats(f, spec.p, balls, quad)?;
    norm_from_stats(spec, &stats, balls, &rho_at_centers(rho, balls)?)
}

fn expect_kind(spec: &SpaceSpec, kind: SpaceKind) -> Result<()> {
    if spec.kind != kind {
        return Err(invalid(format!("expected a {kind:?} space, got {:?}", spec.kind)));
    }
    Ok(())
}

pub fn morrey_norm<F: NormTarget + ?Sized>(f: &F, spec: &SpaceSpec, rho: &RhoField, balls: &[Ball], quad: &QuadratureSpec) -> Result<NormReport> {
    expect_kind(spec, SpaceKind::Morrey)?;
    space_norm(f, spec, rho, balls, quad)
}

pub fn weak_morrey_norm<F: NormTarget + ?Sized>(
    f: &F,
    spec: &SpaceSpec,
    rho: &RhoField,
    balls: &[Ball],
    quad: &QuadratureSpec,
) -> Result<NormReport> {
    expect_kind(spec, SpaceKind::WeakMorrey)?;
    space_norm(f, spec, rho, balls, quad)
}

pub fn bmo_norm<F: NormTarget + ?Sized>(f: &F, theta: f64, rho: &RhoField, balls: &[Ball], quad: &QuadratureSpec) -> Result<NormReport> {
    space_norm(f, &SpaceSpec::bmo(theta), rho, balls, quad)
}

/// `C^β_{ρ,θ}` norm; `β = 0` gives the BMO norm.
pub fn hoelder_norm<F: NormTarget + ?Sized>(
    f: &F,
    beta: f64,
    theta: f64,
    rho: &RhoField,
    balls: &[Ball],
    quad: &QuadratureSpec,
) -> Result<NormReport> {
    space_norm(f, &SpaceSpec::hoelder(beta, theta), rho, balls, quad)
}

/// `(∫_D |f|^p)^{1/p}` over the ball `D`.
pub fn lebesgue_norm<F: NormTarget + ?Sized>(f: &F, p: f64, domain: &Ball, quad: &QuadratureSpec) -> Result<f64> {
    let stat = ball_stats(f, p, std::slice::from_ref(domain), quad)?[0];
    Ok(stat.power_integral.powf(1.0 / p))
}

/// `|{|f| > λ}|` for indicators and decreasing powers (and their multiples).
pub fn superlevel_volume(f: &TestFunction, lambda: f64) -> Option<f64> {
    if !(lambda >= 0.0) {
        return None;
    }
    match f {
        TestFunction::Scaled { factor, inner } => {
            if *factor == 0.0 {
                Some(0.0)
            } else {
                superlevel_volume(inner, lambda / factor.abs())
            }
        }
        TestFunction::Indicator { ball } => Some(if lambda < 1.0 { ball.volume() } else { 0.0 }),
        TestFunction::Power {
            center,
            gamma,
            cutoff,
            radius,
        } if *gamma > 0.0 => {
            if cutoff.is_some_and(|c| lambda >= c) {
                return Some(0.0);
            }
            let r = lambda.powf(-1.0 / gamma).min(radius.unwrap_or(f64::INFINITY));
            let n = center.n();
            Some(unit_ball_volume(GroupParams::new(n).ok()?) * r.powi(2 * n as i32 + 2))
        }
        _ => None,
    }
}

/// Closed-form `sup_λ λ |{|f| > λ}|^{1/p}` where [`superlevel_volume`] applies.
fn weak_lebesgue_closed(f: &TestFunction, p: f64) -> Option<f64> {
    match f {
        TestFunction::Scaled { factor, inner } => weak_lebesgue_closed(inner, p).map(|v| factor.abs() * v),
        TestFunction::Indicator { ball } => Some(ball.volume().powf(1.0 / p)),
        TestFunction::Power {
            center,
            gamma,
            cutoff,
            radius,
        } if *gamma > 0.0 => {
            let n = center.n();
            let q = (2 * n + 2) as f64;
            let b1 = unit_ball_volume(GroupParams::new(n).ok()?).powf(1.0 / p);
            let c = cutoff.unwrap_or(f64::INFINITY);
            let lam_r = radius.map_or(0.0, |r| r.powf(-gamma));
            // Below λ_R the level set is the whole support and φ(λ) grows linearly.
            let mut best: f64 = 0.0;
            if lam_r > 0.0 {
                let lam = lam_r.min(c);
                best = lam * b1 * radius.unwrap().powf(q / p);
            }
            if c > lam_r {
                let e = 1.0 - q / (gamma * p);
                let phi = |lam: f64| b1 * lam.powf(e);
                let at_c = if c.is_finite() {
                    phi(c)
                } else if e > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                let at_r = if lam_r > 0.0 {
                    phi(lam_r)
                } else if e < 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                best = if e == 0.0 { best.max(b1) } else { best.max(at_c).max(at_r) };
            }
            Some(best)
        }
        _ => None,
    }
}

/// `sup_λ λ |{u ∈ D : |f(u)| > λ}|^{1/p}`; exact level-set volumes for
/// indicators and decreasing powers (over all of `H^n`), sampled level sets
/// over `D` otherwise.
pub fn weak_lebesgue_norm(f: &TestFunction, p: f64, domain: &Ball, quad: &QuadratureSpec) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be at least 1, got {p}")));
    }
    if let Some(v) = weak_lebesgue_closed(f, p) {
        return Ok(v);
    }
    weak_lebesgue_norm_sampled(f, p, domain, quad)
}

/// Sampled-level-set version of [`weak_lebesgue_norm`] for any target.
pub fn weak_lebesgue_norm_sampled<F: NormTarget + ?Sized>(f: &F, p: f64, domain: &Ball, quad: &QuadratureSpec) -> Result<f64> {
    Ok(ball_stats(f, p, std::slice::from_ref(domain), quad)?[0].weak)
}

/// Ball-family generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BallFamilySpec {
    pub count: usize,
    pub half_width: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Points that ball centers cluster around with probability `anchor_fraction`.
    pub anchors: Vec<GroupElement>,
    pub anchor_fraction: f64,
    /// Centered balls per anchor, log-spaced over `[r_min, r_max]`, placed
    /// ahead of the `count` random balls.
    pub ladder: usize,
}

impl Default for BallFamilySpec {
    fn default() -> Self {
        Self {
            count: 64,
            half_width: 10.0,
            r_min: 1e-2,
            r_max: 1e2,
            anchors: Vec::new(),
            anchor_fraction: 0.25,
            ladder: 17,
        }
    }
}

impl BallFamilySpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(invalid("ball family must contain at least one ball"));
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(invalid("ball radii must satisfy 0 < r_min < r_max"));
        }
        if !(self.half_width > 0.0) || !(0.0..=1.0).contains(&self.anchor_fraction) {
            return Err(invalid("need half_width > 0 and anchor_fraction in [0, 1]"));
        }
        Ok(())
    }

    /// Number of balls generated.
    pub fn total(&self) -> usize {
        self.ladder * self.anchors.len().max(1) + self.count
    }

    /// Twice the random balls; the ladder is unchanged.
    pub fn doubled(&self) -> Self {
        Self {
            count: 2 * self.count,
            ..self.clone()
        }
    }
}

/// Balls adapted to a function with center `c` and scale `s`: centered balls
/// at its profile breakpoints and at radii `s·2^{k/4}`, `|k| ≤ 8`, then balls
/// of radius `s·2^{k/2}`, `−4 ≤ k ≤ 2`, centered at horizontal and vertical
/// offsets `s·2^{k/2}`, `|k| ≤ 2`, from `c`.
pub fn feature_balls(f: &TestFunction) -> Vec<Ball> {
    let Some(sym) = f.symmetry() else {
        return Vec::new();
    };
    let mut radii: Vec<f64> = (-8..=8).map(|k| sym.scale * 2f64.powf(k as f64 / 4.0)).collect();
    radii.extend(sym.breaks.iter().copied().filter(|&b| b > 0.0 && b.is_finite()));
    radii.sort_by(f64::total_cmp);
    radii.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-12);
    let mut balls: Vec<Ball> = radii
        .into_iter()
        .map(|radius| Ball {
            center: sym.center.clone(),
            radius,
        })
        .collect();
    let n = sym.center.n();
    for k in -2..=2 {
        let d = sym.scale * 2f64.powf(k as f64 / 2.0);
        let mut x = vec![0.0; 2 * n + 1];
        x[0] = d;
        let mut t = vec![0.0; 2 * n + 1];
        t[2 * n] = d * d;
        for off in [x, t] {
            let center = sym.center.mul(&GroupElement::from_coords(&off).expect("finite"));
            for j in -4..=2 {
                balls.push(Ball {
                    center: center.clone(),
                    radius: sym.scale * 2f64.powf(j as f64 / 2.0),
                });
            }
        }
    }
    balls
}

/// The anchor ladders (the identity if there are no anchors), then `count`
/// balls with log-uniform radii. The first random ball is centered at the first
/// anchor; later ones land within one radius of an anchor with probability
/// `anchor_fraction` and are uniform in the box otherwise. Every random ball consumes the same
/// draws, so families with equal ladders are prefix-stable.
pub fn ball_family(n: usize, spec: &BallFamilySpec, seed: u64) -> Result<Vec<Ball>> {
    spec.validate()?;
    let anchors = if spec.anchors.is_empty() {
        vec![GroupElement::identity(n)]
    } else {
        spec.anchors.clone()
    };
    if anchors.iter().any(|a| a.n() != n) {
        return Err(invalid("anchor dimension does not match n"));
    }
    let mut balls = Vec::with_capacity(spec.total());
    for a in &anchors {
        for k in 0..spec.ladder {
            let frac = if spec.ladder == 1 { 0.5 } else { k as f64 / (spec.ladder - 1) as f64 };
            balls.push(Ball {
                center: a.clone(),
                radius: spec.r_min * (spec.r_max / spec.r_min).powf(frac),
            });
        }
    }
    let unit = Ball::unit(n);
    let mut rng = rng_for(seed, 0xba11f);
    balls.extend((0..spec.count).map(|i| {
        let snap: f64 = rng.gen();
        let pick = rng.gen_range(0..anchors.len());
        let free = random_point_in_box(&mut rng, n, spec.half_width);
        let radius = log_uniform(&mut rng, spec.r_min, spec.r_max);
        let offset = random_point_in_ball(&mut rng, &unit);
        let center = if i == 0 {
            anchors[0].clone()
        } else if snap < spec.anchor_fraction {
            anchors[pick].mul(&offset.dilate(radius))
        } else {
            free
        };
        Ball { center, radius }
    }));
    Ok(balls)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family(count: usize) -> Vec<Ball> {
        ball_family(1, &BallFamilySpec { count, ..Default::default() }, 7).unwrap()
    }

    #[test]
    fn centered_rule_integrates_volume_exactly() {
        let f = TestFunction::Constant { value: 1.0 };
        let sym = Symmetry {
            center: GroupElement::h1(0.3, 0.2, -0.1),
            radial: false,
            scale: 1.0,
            support: None,
            breaks: vec![],
        };
        let mut nodes = Nodes::default();
        centered_nodes(&f, &sym, 2.0, &mut nodes);
        let vol: f64 = nodes.weights.iter().sum();
        let exact = Ball::new(sym.center.clone(), 2.0).unwrap().volume();
        assert!((vol / exact - 1.0).abs() < 1e-12, "{vol} {exact}");
    }

    #[test]
    fn families_are_prefix_stable() {
        let a = family(16);
        let b = family(32);
        assert_eq!(a.len(), 17 + 16);
        assert_eq!(a[..], b[..a.len()]);
        assert!(a[0].center.is_identity());
    }

    #[test]
    fn indicator_lebesgue_norm_is_root_volume() {
        let f = TestFunction::indicator(Ball::unit(1));
        let v = lebesgue_norm(&f, 2.0, &Ball::new(GroupElement::identity(1), 5.0).unwrap(), &QuadratureSpec::default()).unwrap();
        assert!((v - (PI * PI / 2.0).sqrt()).abs() < 1e-10, "{v}");
    }

    #[test]
    fn bmo_is_hoelder_at_zero() {
        let f = TestFunction::LogNorm {
            center: GroupElement::identity(1),
        };
        let balls = family(12);
        let quad = QuadratureSpec::default();
        let rho = RhoField::free();
        let a = bmo_norm(&f, 0.0, &rho, &balls, &quad).unwrap();
        let b = hoelder_norm(&f, 0.0, 0.0, &rho, &balls, &quad).unwrap();
        assert!((a.value - b.value).abs() <= 1e-14 * a.value);
    }

    #[test]
    fn constant_is_not_a_morrey_member() {
        let f = TestFunction::Constant { value: 1.0 };
        let balls = family(64);
        let r = morrey_norm(
            &f,
            &SpaceSpec::morrey(2.0, 0.5, 0.0),
            &RhoField::free(),
            &balls,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(!r.stabilized, "{r:?}");
        assert!(r.scale_growth > 2.0);
    }
}
