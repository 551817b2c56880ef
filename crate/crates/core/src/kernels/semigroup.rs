//! Heat and Schrödinger semigroups applied to test functions.

use once_cell::sync::Lazy;
use parking_lot::Mutex;
use rand::Rng;
use rand_distr::StandardNormal;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::functions::{ScalarField, TestFunction};
use crate::group::GroupElement;
use crate::kernels::heat::{heat_kernel_zt, HeatQuadrature};
use crate::kernels::propagator::{Evolution, TrotterSpec};
use crate::potential::Potential;
use crate::quad::{composite_gl, GaussLegendre};
use crate::sampling::rng_for;

/// Tensor rule for `∫ H_1(ω) g(ω) dω` in cylindrical coordinates
/// `ω = (rθ, t)`, `θ ∈ S^{2n−1}`, with `H_1` folded into the weights.
pub struct HeatPointRule {
    n: usize,
    /// `(r, t, weight · H_1(r, t))` for each radial/vertical node.
    nodes: Vec<(f64, f64, f64)>,
    /// Unit directions in `R^{2n}` with equal weights summing to `|S^{2n−1}|`.
    directions: Vec<Vec<f64>>,
    direction_weight: f64,
    /// `1 − Σ weights`: heat mass outside the truncated cylinder.
    pub truncated_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatRuleSize {
    pub radial: usize,
    pub vertical: usize,
    pub angular: usize,
}

impl Default for HeatRuleSize {
    fn default() -> Self {
        Self {
            radial: 24,
            vertical: 64,
            angular: 16,
        }
    }
}

type RuleKey = (usize, u64, usize, usize, usize);
static RULES: Lazy<Mutex<HashMap<RuleKey, Arc<HeatPointRule>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

impl HeatPointRule {
    /// Rule on the cylinder `r ≤ 8c_R`, `|t| ≤ 24c_R` (unit time), where the
    /// heat kernel has decayed below `1e−13` (r) and `1e−7` (t) of its peak.
    pub fn get(n: usize, truncation: f64, size: HeatRuleSize) -> Result<Arc<HeatPointRule>> {
        if !(truncation > 0.0) {
            return Err(invalid("truncation multiplier must be positive"));
        }
        let key = (n, truncation.to_bits(), size.radial, size.vertical, size.angular);
        if let Some(r) = RULES.lock().get(&key) {
            return Ok(r.clone());
        }
        let rule = Arc::new(Self::build(n, truncation, size)?);
        RULES.lock().insert(key, rule.clone());
        Ok(rule)
    }

    fn build(n: usize, truncation: f64, size: HeatRuleSize) -> Result<Self> {
        let hq = HeatQuadrature::default();
        let r_max = 8.0 * truncation;
        let t_max = 24.0 * truncation;
        let radial: Vec<(f64, f64)> = GaussLegendre::new(size.radial).mapped(0.0, r_max).collect();
        let half: Vec<(f64, f64)> = composite_gl(0.0, t_max, size.vertical.div_ceil(16), 8);
        let vertical: Vec<(f64, f64)> = half.iter().flat_map(|&(t, w)| [(t, w), (-t, w)]).collect();
        let pairs: Vec<(f64, f64, f64)> = radial
            .iter()
            .flat_map(|&(r, wr)| vertical.iter().map(move |&(t, wt)| (r, t, wr * wt * r.powi(2 * n as i32 - 1))))
            .collect();
        let nodes: Vec<(f64, f64, f64)> = crate::exec::map_slice(&pairs, |&(r, t, w)| heat_kernel_zt(n, 1.0, r * r, t, &hq).map(|h| (r, t, w * h)))
            .into_iter()
            .collect::<Result<_>>()?;
        let (directions, area) = directions(n, size.angular);
        let direction_weight = area / directions.len() as f64;
        let mass: f64 = nodes.iter().map(|x| x.2).sum::<f64>() * area;
        Ok(Self {
            n,
            nodes,
            directions,
            direction_weight,
            truncated_mass: 1.0 - mass,
        })
    }

    /// `(g * H_s)(u) = ∫ H_1(ω) g(u·δ_{√s}ω) dω`.
    pub fn apply<F: ScalarField + ?Sized>(&self, s: f64, g: &F, u: &GroupElement) -> f64 {
        let a = s.sqrt();
        let n = self.n;
        let mut coords = vec![0.0; 2 * n + 1];
        let mut total = 0.0;
        for &(r, t, w) in &self.nodes {
            let mut inner = 0.0;
            for d in &self.directions {
                for (c, dc) in coords.iter_mut().zip(d) {
                    *c = a * r * dc;
                }
                coords[2 * n] = s * t;
                let w_el = GroupElement::from_coords(&coords).expect("finite");
                inner += g.eval(&u.mul(&w_el));
            }
            total += w * inner;
        }
        total * self.direction_weight
    }
}

fn directions(n: usize, k: usize) -> (Vec<Vec<f64>>, f64) {
    let area = crate::group::sphere_area(n);
    if n == 1 {
        let dirs = (0..k)
            .map(|j| {
                let phi = 2.0 * PI * (j as f64 + 0.5) / k as f64;
                vec![phi.cos(), phi.sin()]
            })
            .collect();
        return (dirs, area);
    }
    // Antithetic Gaussian directions; symmetric sets integrate odd moments exactly.
    let mut rng = rng_for(0xd1ec, n as u64);
    let count = k * k;
    let mut dirs = Vec::with_capacity(2 * count);
    for _ in 0..count {
        let v: Vec<f64> = (0..2 * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v: Vec<f64> = v.iter().map(|x| x / len).collect();
        dirs.push(v.iter().map(|x| -x).collect());
        dirs.push(v);
    }
    (dirs, area)
}

/// `(e^{sΔ} f)(u)` by direct quadrature against the heat kernel.
pub fn heat_semigroup_apply(s: f64, f: &TestFunction, u: &GroupElement, hq: &HeatQuadrature, ts: &TrotterSpec) -> Result<f64> {
    heat_semigroup_apply_field(s, f, u, hq, ts, HeatRuleSize::default())
}

pub fn heat_semigroup_apply_field<F: ScalarField + ?Sized>(
    s: f64,
    f: &F,
    u: &GroupElement,
    hq: &HeatQuadrature,
    ts: &TrotterSpec,
    size: HeatRuleSize,
) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("semigroup time must be positive, got {s}")));
    }
    if hq.convention != crate::kernels::heat::HeatConvention::GroupLaw {
        return Err(invalid("semigroup quadrature requires the group-law heat kernel"));
    }
    let rule = HeatPointRule::get(u.n(), ts.truncation, size)?;
    if rule.truncated_mass.abs() > 1e-3 {
        return Err(Error::NonConvergence(format!(
            "heat mass outside the truncation cylinder is {:.2e}",
            rule.truncated_mass
        )));
    }
    Ok(rule.apply(s, f, u))
}

/// Local coordinates `(|z|, t)` of `c^{-1}u`.
pub(crate) fn local_rt(center: &GroupElement, u: &GroupElement) -> (f64, f64) {
    let w = center.inverse().mul(u);
    (w.z_norm_sq().sqrt(), w.t())
}

/// Grid length scale placing the support of `f` at `r = 2.5ℓ` (`|t| ≤ 6.25ℓ²`)
/// on the default grid, leaving room for spreading before the first regrid.
pub(crate) fn grid_scale(f: &TestFunction) -> f64 {
    f.effective_support().unwrap_or_else(|| f.scale()) / 2.5
}

/// Center of a radial test function, checked against the potential's symmetry.
pub(crate) fn propagation_center(v: &Potential, f: &TestFunction) -> Result<GroupElement> {
    let c = f
        .radial_center()
        .ok_or_else(|| Error::Unsupported("grid propagation needs a Korányi-radial test function".into()))?;
    if f.effective_support().is_none() {
        return Err(Error::Unsupported("grid propagation needs a decaying test function".into()));
    }
    if !v.is_translation_invariant() && !c.is_identity() {
        return Err(Error::Unsupported(
            "non-constant potentials are propagated only for functions centered at the identity".into(),
        ));
    }
    Ok(c.clone())
}

/// Grid evolution of `f` under `e^{−s(−Δ+V)}` evaluated at `points`.
///
/// With `full_trotter` the Trotter loop runs even for constant `V`.
pub fn grid_semigroup_apply(
    v: &Potential,
    s: f64,
    f: &TestFunction,
    points: &[GroupElement],
    ts: &TrotterSpec,
    full_trotter: bool,
) -> Result<Vec<f64>> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("semigroup time must be positive, got {s}")));
    }
    let c = propagation_center(v, f)?;
    let n = c.n();
    let profile = |r: f64, t: f64| f.profile((r.powi(4) + t * t).sqrt().sqrt());
    let mut evo = Evolution::from_function(n, profile, grid_scale(f), *v, *ts)?;
    if full_trotter {
        evo = evo.uncollapsed();
    }
    evo.advance_to(s)?;
    Ok(points
        .iter()
        .map(|u| {
            let (r, t) = local_rt(&c, u);
            evo.eval(r, t)
        })
        .collect())
}

/// `(e^{−s(−Δ+V)} f)(u)` via the Trotter product on the radial grid; the
/// zero potential is delegated to [`heat_semigroup_apply`].
pub fn schrodinger_semigroup_apply(v: &Potential, s: f64, f: &TestFunction, u: &GroupElement, ts: &TrotterSpec) -> Result<f64> {
    ts.validate()?;
    if v.is_zero() {
        return heat_semigroup_apply(s, f, u, &HeatQuadrature::default(), ts);
    }
    Ok(grid_semigroup_apply(v, s, f, std::slice::from_ref(u), ts, true)?[0])
}
