//! `I_α = L^{−α/2}` and its kernel by subordination.
//!
//! Two routes are available. The quadrature route integrates the λ-form of
//! the heat kernel in time and is exact for `V = 0` and constant `V`
//! (`P_s = e^{−cs} H_s`). The grid route starts a point source or a test
//! function on the radial grid, carries it through the log-time nodes and
//! accumulates the weighted snapshots; it works for every catalog potential.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::functions::TestFunction;
use crate::group::GroupElement;
use crate::kernels::heat::{heat_kernel, heat_kernel_zt, HeatQuadrature};
use crate::kernels::propagator::{Evolution, RadialField, TrotterSpec};
use crate::kernels::semigroup::{grid_scale, local_rt, propagation_center};
use crate::potential::{critical_radius, Potential};

fn q_of(n: usize) -> f64 {
    (2 * n + 2) as f64
}

/// `∫_{s_max}^∞ H_s(0) s^{α/2−1} ds = H_1(0) s_max^{(α−Q)/2} / ((Q−α)/2)`.
fn free_tail(n: usize, alpha: f64, s_max: f64) -> Result<f64> {
    let q = q_of(n);
    let h1 = heat_kernel_zt(n, 1.0, 0.0, 0.0, &HeatQuadrature::default())?;
    Ok(h1 * s_max.powf((alpha - q) / 2.0) / ((q - alpha) / 2.0))
}

/// Value of a subordinated quantity together with the estimated tail that
/// lies beyond the time window (already included in `value` when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subordinated {
    pub value: f64,
    pub tail: f64,
}

/// `K*_α(u) = Γ(α/2)^{-1} ∫ H_s(u) s^{α/2−1} ds`, the kernel of `(−Δ)^{−α/2}`.
pub fn riesz_kernel_free(alpha: f64, u: &GroupElement, sub: &super::SubordinationSpec, hq: &HeatQuadrature) -> Result<f64> {
    damped_riesz_kernel(alpha, 0.0, u, sub, hq)
}

/// `Γ(α/2)^{-1} ∫ e^{−cs} H_s(u) s^{α/2−1} ds`: the kernel of `(−Δ + c)^{−α/2}`.
pub fn damped_riesz_kernel(alpha: f64, c: f64, u: &GroupElement, sub: &super::SubordinationSpec, hq: &HeatQuadrature) -> Result<f64> {
    let n = u.n();
    let sub = super::SubordinationSpec { alpha, ..*sub };
    sub.validate(q_of(n))?;
    if u.is_identity() {
        return Err(invalid("the fractional kernel is singular at the identity"));
    }
    if !(c >= 0.0) {
        return Err(invalid("damping constant must be nonnegative"));
    }
    let d2 = u.norm().powi(2);
    let s_min = sub.s_min_factor * d2;
    let mut s_max = sub.s_max_factor * d2;
    if c > 0.0 {
        s_max = s_max.min(40.0 / c).max(s_min * 10.0);
    }
    let rule = sub.time_rule(s_min, s_max);
    let body = exec::map_slice(&rule, |&(s, w)| {
        heat_kernel(s, u, hq).map(|h| w * (-c * s).exp() * h * s.powf(alpha / 2.0))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?
    .into_iter()
    .sum::<f64>();
    let tail = if c == 0.0 { free_tail(n, alpha, s_max)? } else { 0.0 };
    Ok(sub.gamma_factor() * (body + tail))
}

/// Subordinated point-source evolution `Γ(α/2)^{-1} Σ_k w_k s_k^{α/2} P_{s_k}(·, pole)`
/// with every snapshot kept so that `P_s` itself can be queried.
pub struct KernelField {
    n: usize,
    potential: Potential,
    alpha: f64,
    gamma: f64,
    nodes: Vec<(f64, f64)>,
    fields: Vec<RadialField>,
    tail: f64,
    s_window: (f64, f64),
}

impl KernelField {
    /// Field resolving `K_α(u, v)` for `d_min ≤ |v^{-1}u| ≤ d_max`.
    ///
    /// Constant potentials reuse a single field for all pairs; homogeneous
    /// powers need the identity (the pole of `V`) as one of the two points.
    pub fn build(v: &Potential, alpha: f64, n: usize, d_min: f64, d_max: f64, sub: &super::SubordinationSpec, ts: &TrotterSpec) -> Result<Self> {
        let sub = super::SubordinationSpec { alpha, ..*sub };
        sub.validate(q_of(n))?;
        if !(d_min > 0.0 && d_min <= d_max && d_max.is_finite()) {
            return Err(invalid("kernel field needs 0 < d_min ≤ d_max < ∞"));
        }
        let mut reach = d_max;
        if !v.is_zero() {
            reach = reach.max(critical_radius(v, &GroupElement::identity(n), 1e-6)?);
        }
        let s_min = sub.s_min_factor * d_min * d_min;
        let s_max = sub.s_max_factor * reach * reach;
        let nodes = sub.time_rule(s_min, s_max);
        let mut evo = Evolution::from_point_source(n, s_min, *v, *ts)?;
        let mut fields = Vec::with_capacity(nodes.len());
        let mut peak: f64 = 0.0;
        for &(s, w) in &nodes {
            evo.advance_to(s)?;
            let size = w * s.powf(alpha / 2.0) * evo.field().max_abs();
            peak = peak.max(size);
            fields.push(evo.field().clone());
            if !v.is_zero() && size < 1e-16 * peak {
                break;
            }
        }
        let tail = if v.is_zero() { free_tail(n, alpha, s_max)? } else { 0.0 };
        Ok(Self {
            n,
            potential: *v,
            alpha,
            gamma: sub.gamma_factor(),
            nodes,
            fields,
            tail,
            s_window: (s_min, s_max),
        })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn window(&self) -> (f64, f64) {
        self.s_window
    }

    /// `K_α` at local coordinates `(|z|, t)` about the pole.
    pub fn eval_local(&self, r: f64, t: f64) -> f64 {
        let body: f64 = self
            .fields
            .iter()
            .zip(&self.nodes)
            .map(|(f, &(s, w))| w * s.powf(self.alpha / 2.0) * f.eval(r, t))
            .sum();
        self.gamma * (body + self.tail)
    }

    /// Local coordinates of the pair `(u, v)` relative to the pole.
    fn pair_local(&self, u: &GroupElement, v: &GroupElement) -> Result<(f64, f64)> {
        if u.n() != self.n || v.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: if u.n() != self.n { u.n() } else { v.n() },
            });
        }
        if self.potential.is_translation_invariant() {
            return Ok(local_rt(v, u));
        }
        // P_s is symmetric, so either point may sit at the pole.
        if v.is_identity() {
            Ok(local_rt(v, u))
        } else if u.is_identity() {
            Ok(local_rt(u, v))
        } else {
            Err(Error::Unsupported(
                "kernels of a homogeneous potential are available only with one point at the identity".into(),
            ))
        }
    }

    pub fn kernel(&self, u: &GroupElement, v: &GroupElement) -> Result<f64> {
        let (r, t) = self.pair_local(u, v)?;
        if r == 0.0 && t == 0.0 {
            return Err(invalid("the fractional kernel is singular on the diagonal"));
        }
        Ok(self.eval_local(r, t))
    }

    /// Stored times `s_k` (only those reached before the field died out).
    pub fn times(&self) -> Vec<f64> {
        self.nodes.iter().take(self.fields.len()).map(|x| x.0).collect()
    }

    /// `P_{s_k}(u, v)` at the `k`-th stored time.
    pub fn semigroup_kernel(&self, k: usize, u: &GroupElement, v: &GroupElement) -> Result<f64> {
        let (r, t) = self.pair_local(u, v)?;
        Ok(self.fields.get(k).map_or(0.0, |f| f.eval(r, t)))
    }
}

/// `K_α(u, v)` by the grid route.
pub fn fractional_kernel(
    v: &Potential,
    alpha: f64,
    u: &GroupElement,
    w: &GroupElement,
    sub: &super::SubordinationSpec,
    ts: &TrotterSpec,
) -> Result<f64> {
    let d = u.dist(w);
    if d == 0.0 {
        return Err(invalid("the fractional kernel is singular on the diagonal"));
    }
    KernelField::build(v, alpha, u.n(), d, d, sub, ts)?.kernel(u, w)
}

/// Shape of the polar output table of [`FractionalField`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarTable {
    pub radial: usize,
    pub angular: usize,
    /// Table covers `[inner·ℓ, outer·ℓ]` with `ℓ` the support radius of `f`.
    pub inner: f64,
    pub outer: f64,
}

impl Default for PolarTable {
    fn default() -> Self {
        Self {
            radial: 128,
            angular: 33,
            inner: 1e-3,
            outer: 30.0,
        }
    }
}

/// `I_α f` for a Korányi-radial `f`, tabulated in polar coordinates
/// `z = ρ√cos θ ω`, `t = ρ² sin θ` about the center of `f`.
pub struct FractionalField {
    center: GroupElement,
    table: Vec<f64>,
    shape: PolarTable,
    log_lo: f64,
    log_step: f64,
    support: f64,
    pub tail: f64,
    pub head: f64,
}

impl FractionalField {
    pub fn build(v: &Potential, f: &TestFunction, sub: &super::SubordinationSpec, ts: &TrotterSpec, shape: PolarTable) -> Result<Self> {
        let center = propagation_center(v, f)?;
        let n = center.n();
        let q = q_of(n);
        sub.validate(q)?;
        if shape.radial < 4 || shape.angular < 4 || !(shape.inner > 0.0 && shape.inner < shape.outer) {
            return Err(invalid("polar table needs at least 4×4 nodes and 0 < inner < outer"));
        }
        let alpha = sub.alpha;
        let support = f.effective_support().expect("checked by propagation_center");
        let ell = grid_scale(f);
        let s_min = sub.s_min_factor * support * support;
        let s_max = match v {
            Potential::Zero => sub.s_max_factor * support * support,
            Potential::Constant { c } => (sub.s_max_factor * support * support).min(40.0 / c).max(10.0 * s_min),
            Potential::HomogeneousPower { .. } => {
                let rho0 = critical_radius(v, &center, 1e-6)?;
                sub.s_max_factor * support.max(rho0).powi(2)
            }
        };
        let rule = sub.time_rule(s_min, s_max);
        let profile = |r: f64, t: f64| f.profile((r.powi(4) + t * t).sqrt().sqrt());
        let mut evo = Evolution::from_function(n, profile, ell, *v, *ts)?;
        let mass = evo.field().mass();

        let (nr, na) = (shape.radial, shape.angular);
        let log_lo = (shape.inner * support).ln();
        let log_step = (shape.outer / shape.inner).ln() / (nr - 1) as f64;
        let points: Vec<(f64, f64)> = (0..nr)
            .flat_map(|i| {
                let rho = (log_lo + i as f64 * log_step).exp();
                (0..na).map(move |j| {
                    let th = FRAC_PI_2 * j as f64 / (na - 1) as f64;
                    (rho * th.cos().sqrt(), rho * rho * th.sin())
                })
            })
            .collect();
        let mut table = vec![0.0; nr * na];
        let mut peak: f64 = 0.0;
        for &(s, w) in &rule {
            evo.advance_to(s)?;
            let weight = w * s.powf(alpha / 2.0);
            let field = evo.field();
            let vals = exec::map_slice(&points, |&(r, t)| field.eval(r, t));
            let mut size: f64 = 0.0;
            for (acc, val) in table.iter_mut().zip(vals) {
                *acc += weight * val;
                size = size.max((weight * val).abs());
            }
            peak = peak.max(size);
            if !v.is_zero() && size < 1e-16 * peak {
                break;
            }
        }
        let head_factor = s_min.powf(alpha / 2.0) / (alpha / 2.0);
        for (acc, &(r, t)) in table.iter_mut().zip(&points) {
            *acc += head_factor * profile(r, t);
        }
        let tail = if v.is_zero() {
            let h1 = heat_kernel_zt(n, 1.0, 0.0, 0.0, &HeatQuadrature::default())?;
            mass * h1 * s_max.powf((alpha - q) / 2.0) / ((q - alpha) / 2.0)
        } else {
            0.0
        };
        let gamma = sub.gamma_factor();
        table.iter_mut().for_each(|x| *x = gamma * (*x + tail));
        Ok(Self {
            center,
            table,
            shape,
            log_lo,
            log_step,
            support,
            tail: gamma * tail,
            head: gamma * head_factor * f.profile(0.0).abs(),
        })
    }

    pub fn center(&self) -> &GroupElement {
        &self.center
    }

    /// Support radius of the source function.
    pub fn length(&self) -> f64 {
        self.support
    }

    /// Field of `factor · f(δ_{1/a}(c⁻¹·))` from the field of `f` centered at the
    /// identity, namely `factor · a^α (I_α f)(δ_{1/a}(c⁻¹u))`. Exact for `V = 0`;
    /// with `a = 1` it holds for every translation-invariant potential.
    pub fn transformed(&self, center: GroupElement, a: f64, factor: f64, alpha: f64) -> Self {
        let k = factor * a.powf(alpha);
        Self {
            center,
            table: self.table.iter().map(|x| k * x).collect(),
            shape: self.shape,
            log_lo: self.log_lo + a.ln(),
            log_step: self.log_step,
            support: a * self.support,
            tail: k * self.tail,
            head: k * self.head,
        }
    }

    /// Table value interpolated geometrically in `ln ρ` (linearly where the
    /// sign changes) and linearly in `θ`; power-law extrapolation beyond the
    /// outer radius.
    fn lookup(&self, rho: f64, theta: f64) -> f64 {
        let (nr, na) = (self.shape.radial, self.shape.angular);
        let y = (theta / FRAC_PI_2 * (na - 1) as f64).clamp(0.0, (na - 1) as f64);
        let j = (y.floor() as usize).min(na - 2);
        let fy = y - j as f64;
        let at = |i: usize| (1.0 - fy) * self.table[i * na + j] + fy * self.table[i * na + j + 1];
        if rho <= 0.0 {
            return at(0);
        }
        let x = (rho.ln() - self.log_lo) / self.log_step;
        if x <= 0.0 {
            return at(0);
        }
        if x >= (nr - 1) as f64 {
            let (a, b) = (at(nr - 2), at(nr - 1));
            if a > 0.0 && b > 0.0 && b < a {
                return b * (b / a).powf(x - (nr - 1) as f64);
            }
            return b;
        }
        let i = (x.floor() as usize).min(nr - 2);
        let fx = x - i as f64;
        let (a, b) = (at(i), at(i + 1));
        if a > 0.0 && b > 0.0 {
            a.powf(1.0 - fx) * b.powf(fx)
        } else {
            (1.0 - fx) * a + fx * b
        }
    }

    /// `(I_α f)(u)`.
    pub fn eval(&self, u: &GroupElement) -> f64 {
        let w = self.center.inverse().mul(u);
        let r2 = w.z_norm_sq();
        let t = w.t().abs();
        let rho = (r2 * r2 + t * t).sqrt().sqrt();
        let theta = t.atan2(r2);
        self.lookup(rho, theta)
    }
}

impl crate::functions::ScalarField for FractionalField {
    fn eval(&self, u: &GroupElement) -> f64 {
        FractionalField::eval(self, u)
    }
}

/// `(I_α f)(u)` with the tail contribution reported separately.
pub fn fractional_integral_report(
    v: &Potential,
    f: &TestFunction,
    u: &GroupElement,
    sub: &super::SubordinationSpec,
    ts: &TrotterSpec,
) -> Result<Subordinated> {
    let field = FractionalField::build(v, f, sub, ts, PolarTable::default())?;
    Ok(Subordinated {
        value: field.eval(u),
        tail: field.tail,
    })
}

pub fn fractional_integral_apply(v: &Potential, f: &TestFunction, u: &GroupElement, sub: &super::SubordinationSpec, ts: &TrotterSpec) -> Result<f64> {
    Ok(fractional_integral_report(v, f, u, sub, ts)?.value)
}
