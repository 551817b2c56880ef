//! Reverse-Hölder potentials and the critical radius function.

use once_cell::sync::Lazy;
use parking_lot::Mutex;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::group::{Ball, GroupElement, GroupParams};
use crate::sampling::{log_uniform, random_point_in_ball, random_point_in_box, rng_for, QuadratureSpec, UnitBallRule};

/// Closed-form nonnegative potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    Zero,
    Constant {
        c: f64,
    },
    /// `V(u) = scale · |u|^a`.
    HomogeneousPower {
        a: f64,
        scale: f64,
    },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Potential::Zero => Ok(()),
            Potential::Constant { c } if c > 0.0 && c.is_finite() => Ok(()),
            Potential::HomogeneousPower { a, scale } if a >= 0.0 && a.is_finite() && scale > 0.0 && scale.is_finite() => Ok(()),
            other => Err(invalid(format!("invalid potential {other:?}"))),
        }
    }

    pub fn evaluate(&self, u: &GroupElement) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::Constant { c } => c,
            Potential::HomogeneousPower { a, scale } => {
                if a == 0.0 {
                    scale
                } else {
                    scale * u.norm().powf(a)
                }
            }
        }
    }

    /// The value if the potential is constant (including `Zero`).
    pub fn constant_value(&self) -> Option<f64> {
        match *self {
            Potential::Zero => Some(0.0),
            Potential::Constant { c } => Some(c),
            Potential::HomogeneousPower { a: 0.0, scale } => Some(scale),
            Potential::HomogeneousPower { .. } => None,
        }
    }

    /// Left-invariant potentials make every operator built from them commute
    /// with left translations.
    pub fn is_translation_invariant(&self) -> bool {
        self.constant_value().is_some()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }
}

pub fn evaluate_potential(v: &Potential, u: &GroupElement) -> f64 {
    v.evaluate(u)
}

/// Deterministic family of balls: the first center is the identity, the rest
/// are uniform in `[−h, h]^{2n+1}`; radii are log-uniform in `[r_min, r_max]`.
/// Generation is sequential, so a family of size `2k` extends the family of size `k`.
pub fn random_ball_family(n: usize, count: usize, seed: u64, half_width: f64, r_min: f64, r_max: f64) -> Vec<Ball> {
    let mut rng = rng_for(seed, 0xba11);
    (0..count)
        .map(|i| {
            let center = if i == 0 {
                GroupElement::identity(n)
            } else {
                random_point_in_box(&mut rng, n, half_width)
            };
            let radius = log_uniform(&mut rng, r_min, r_max);
            Ball { center, radius }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhEstimate {
    pub s: f64,
    pub constant: f64,
    pub balls_tested: usize,
    pub witness: Ball,
}

/// Empirical reverse-Hölder constant `sup_B (avg_B V^s)^{1/s} / avg_B V`.
pub fn rh_constant_estimate(v: &Potential, s: f64, sampler: &QuadratureSpec, ball_count: usize) -> Result<RhEstimate> {
    rh_constant_estimate_in(v, s, sampler, ball_count, 1, 10.0)
}

pub fn rh_constant_estimate_in(v: &Potential, s: f64, sampler: &QuadratureSpec, ball_count: usize, n: usize, half_width: f64) -> Result<RhEstimate> {
    v.validate()?;
    if !(s > 1.0) {
        return Err(invalid(format!("reverse Hölder exponent must exceed 1, got {s}")));
    }
    if v.is_zero() {
        return Err(invalid("reverse Hölder estimate needs a nonzero potential"));
    }
    if ball_count == 0 {
        return Err(invalid("empty ball family"));
    }
    let rule = UnitBallRule::new(GroupParams::new(n)?, sampler)?;
    let balls = random_ball_family(n, ball_count, sampler.seed, half_width, 1e-2, 1e2);
    let ratios = exec::map_slice(&balls, |b| {
        let m1 = rule.integrate(b, |u| v.evaluate(u));
        let ms = rule.integrate(b, |u| v.evaluate(u).powf(s));
        let vol = b.volume();
        (ms / vol).powf(1.0 / s) / (m1 / vol)
    });
    let (k, constant) = ratios
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &r)| if r > acc.1 { (i, r) } else { acc });
    Ok(RhEstimate {
        s,
        constant,
        balls_tested: balls.len(),
        witness: balls[k].clone(),
    })
}

/// `F(r) = r^{2−Q} ∫_{B(u,r)} V`.
pub fn critical_function(v: &Potential, u: &GroupElement, r: f64, rule: &UnitBallRule) -> f64 {
    let q = (2 * u.n() + 2) as f64;
    let b = Ball {
        center: u.clone(),
        radius: r,
    };
    let integral = match v.constant_value() {
        Some(c) => c * b.volume(),
        None => rule.integrate(&b, |w| v.evaluate(w)),
    };
    r.powf(2.0 - q) * integral
}

/// `ρ(u)` where it has a closed form: `(c|B_1|)^{−1/2}` for a constant `c`,
/// and `(Q|B_1| s/(Q+a))^{−1/(2+a)}` at the identity for `s|u|^a`.
pub fn rho_closed_form(v: &Potential, u: &GroupElement) -> Option<f64> {
    let n = u.n();
    let q = (2 * n + 2) as f64;
    let b1 = Ball::unit(n).volume();
    match *v {
        Potential::Zero => Some(f64::INFINITY),
        _ if v.constant_value().is_some() => Some((v.constant_value()? * b1).powf(-0.5)),
        Potential::HomogeneousPower { a, scale } if u.is_identity() => Some((q * b1 * scale / (q + a)).powf(-1.0 / (2.0 + a))),
        _ => None,
    }
}

/// Default rule for `F(r)`: the `n = 1` polar grid with 24 nodes per axis.
pub fn default_rho_rule(n: usize) -> Result<UnitBallRule> {
    UnitBallRule::new(GroupParams::new(n)?, &QuadratureSpec::grid(24))
}

/// `ρ(u) = sup{r > 0 : F(r) ≤ 1}` to relative width `tol`.
pub fn critical_radius(v: &Potential, u: &GroupElement, tol: f64) -> Result<f64> {
    critical_radius_with(v, u, tol, &default_rho_rule(u.n())?)
}

pub fn critical_radius_with(v: &Potential, u: &GroupElement, tol: f64, rule: &UnitBallRule) -> Result<f64> {
    v.validate()?;
    if v.is_zero() {
        return Err(invalid("the critical radius of the zero potential is infinite"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    solve_critical(|r| critical_function(v, u, r, rule), tol)
}

/// `sup{r > 0 : F(r) ≤ 1}` to relative width `tol`.
fn solve_critical(f: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
    let grid: Vec<f64> = (0..64).map(|k| 1e-8 * 1e16f64.powf(k as f64 / 63.0)).collect();
    let values: Vec<f64> = grid.iter().map(|&r| f(r)).collect();
    // Largest crossing: the sup definition stays meaningful if F is not monotone.
    let k = match values.iter().rposition(|&x| x <= 1.0) {
        None => return Err(Error::Bracketing(format!("F(1e-8) = {:e} > 1", values[0]))),
        Some(k) if k + 1 == grid.len() => return Err(Error::Bracketing(format!("F stays below 1 up to r = 1e8 (F = {:e})", values[k]))),
        Some(k) => k,
    };
    let (mut lo, mut hi) = (grid[k], grid[k + 1]);
    while hi / lo > 1.0 + tol {
        let mid = (lo * hi).sqrt();
        if f(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

/// `G(x) = ∫_{B(x,1)} |w|^a dw` as a function of `ν = |x|` and
/// `φ = atan2(|t|, |z|²)`, which is all it depends on. Tabulated as `ln G`
/// on `ln ν ∈ [ln 10⁻³, ln 10³]` × `φ ∈ [0, π/2]`; constant below the range
/// and `∝ ν^a` above it.
pub struct PowerBallTable {
    a: f64,
    log_lo: f64,
    log_step: f64,
    nu_nodes: usize,
    phi_nodes: usize,
    log_g: Vec<f64>,
}

impl PowerBallTable {
    pub fn new(a: f64, n: usize, rule: &UnitBallRule) -> Result<Self> {
        let (nu_nodes, phi_nodes) = (121, 17);
        let log_lo = 1e-3f64.ln();
        let log_step = (1e6f64).ln() / (nu_nodes - 1) as f64;
        let nodes: Vec<(usize, usize)> = (0..nu_nodes).flat_map(|i| (0..phi_nodes).map(move |j| (i, j))).collect();
        let log_g = exec::map_slice(&nodes, |&(i, j)| {
            let nu = (log_lo + i as f64 * log_step).exp();
            let phi = FRAC_PI_2 * j as f64 / (phi_nodes - 1) as f64;
            let mut c = vec![0.0; 2 * n + 1];
            c[0] = nu * phi.cos().sqrt();
            c[2 * n] = nu * nu * phi.sin();
            let ball = Ball {
                center: GroupElement::from_coords(&c).expect("finite"),
                radius: 1.0,
            };
            rule.integrate(&ball, |w| w.norm().powf(a)).ln()
        });
        Ok(Self {
            a,
            log_lo,
            log_step,
            nu_nodes,
            phi_nodes,
            log_g,
        })
    }

    pub fn eval(&self, nu: f64, phi: f64) -> f64 {
        let y = (phi / FRAC_PI_2 * (self.phi_nodes - 1) as f64).clamp(0.0, (self.phi_nodes - 1) as f64);
        let j = (y.floor() as usize).min(self.phi_nodes - 2);
        let fy = y - j as f64;
        let at = |i: usize| (1.0 - fy) * self.log_g[i * self.phi_nodes + j] + fy * self.log_g[i * self.phi_nodes + j + 1];
        let top = (self.nu_nodes - 1) as f64;
        let x = if nu > 0.0 { (nu.ln() - self.log_lo) / self.log_step } else { 0.0 };
        if x >= top {
            return (at(self.nu_nodes - 1) + self.a * (x - top) * self.log_step).exp();
        }
        let x = x.max(0.0);
        let i = (x.floor() as usize).min(self.nu_nodes - 2);
        let fx = x - i as f64;
        ((1.0 - fx) * at(i) + fx * at(i + 1)).exp()
    }
}

type TableCache = Mutex<HashMap<(u64, usize), Arc<PowerBallTable>>>;

static POWER_TABLES: Lazy<TableCache> = Lazy::new(|| Mutex::new(HashMap::new()));

fn power_table(a: f64, n: usize, rule: &UnitBallRule) -> Result<Arc<PowerBallTable>> {
    let key = (a.to_bits(), n);
    if let Some(t) = POWER_TABLES.lock().get(&key) {
        return Ok(t.clone());
    }
    let t = Arc::new(PowerBallTable::new(a, n, rule)?);
    POWER_TABLES.lock().insert(key, t.clone());
    Ok(t)
}

/// Memoised `ρ`, or `+∞` in the free case.
pub struct RhoField {
    potential: Potential,
    tol: f64,
    rule: Option<UnitBallRule>,
    table: Option<Arc<PowerBallTable>>,
    cache: Mutex<HashMap<Vec<u64>, f64>>,
}

impl RhoField {
    pub fn new(potential: Potential, n: usize, tol: f64) -> Result<Self> {
        potential.validate()?;
        let rule = if potential.is_zero() { None } else { Some(default_rho_rule(n)?) };
        let table = match (potential, &rule) {
            (Potential::HomogeneousPower { a, .. }, Some(rule)) if a != 0.0 => Some(power_table(a, n, rule)?),
            _ => None,
        };
        Ok(Self {
            potential,
            tol,
            rule,
            table,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn free() -> Self {
        Self {
            potential: Potential::Zero,
            tol: 1e-6,
            rule: None,
            table: None,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn rho(&self, u: &GroupElement) -> Result<f64> {
        let Some(rule) = &self.rule else {
            return Ok(f64::INFINITY);
        };
        let key: Vec<u64> = if self.potential.is_translation_invariant() {
            Vec::new()
        } else {
            u.coords().iter().map(|c| c.to_bits()).collect()
        };
        if let Some(&r) = self.cache.lock().get(&key) {
            return Ok(r);
        }
        let r = match (&self.table, self.potential) {
            // F(u, r) = s r^{2+a} G(δ_{1/r} u) and δ_{1/r} keeps the angle.
            (Some(table), Potential::HomogeneousPower { a, scale }) => {
                let nu = u.norm();
                let phi = u.t().abs().atan2(u.z_norm_sq());
                solve_critical(|r| scale * r.powf(2.0 + a) * table.eval(nu / r, phi), self.tol)?
            }
            _ => critical_radius_with(&self.potential, u, self.tol, rule)?,
        };
        self.cache.lock().insert(key, r);
        Ok(r)
    }

    /// `ρ` at many points, computed in parallel and cached.
    pub fn rho_many(&self, points: &[GroupElement]) -> Result<Vec<f64>> {
        exec::map_slice(points, |u| self.rho(u)).into_iter().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoComparability {
    pub c0: f64,
    pub n0: f64,
}

impl RhoComparability {
    /// Smallest `C0` making both inequalities hold for one pair with `N0` fixed.
    fn required_c0(n0: f64, rho_u: f64, rho_v: f64, d: f64) -> f64 {
        let g = 1.0 + d / rho_u;
        let lower = g.powf(-n0) * rho_u / rho_v;
        let upper = rho_v / rho_u * g.powf(-n0 / (n0 + 1.0));
        lower.max(upper).max(1.0)
    }

    /// Both inequalities of the comparability lemma for one pair, with a relative slack.
    pub fn holds(&self, rho_u: f64, rho_v: f64, d: f64, slack: f64) -> bool {
        Self::required_c0(self.n0, rho_u, rho_v, d) <= self.c0 * (1.0 + slack)
    }
}

pub fn c0_grid() -> Vec<f64> {
    (0..32).map(|k| 16f64.powf(k as f64 / 31.0)).collect()
}

pub fn n0_grid() -> Vec<f64> {
    (0..32).map(|k| 0.1 * 100f64.powf(k as f64 / 31.0)).collect()
}

/// Smallest grid `(C0, N0)` (ordered by `C0`, then `N0`) for which
/// `C0^{-1}(1 + d/ρ(u))^{−N0} ≤ ρ(v)/ρ(u) ≤ C0 (1 + d/ρ(u))^{N0/(N0+1)}` on every pair.
pub fn fit_rho_comparability(v: &Potential, pairs: &[(GroupElement, GroupElement)]) -> Result<RhoComparability> {
    if pairs.len() < 10 {
        return Err(invalid("comparability fit needs at least 10 pairs"));
    }
    if v.is_zero() {
        return Err(invalid("comparability fit needs a nonzero potential"));
    }
    let n0s = n0_grid();
    if v.is_translation_invariant() {
        return Ok(RhoComparability { c0: 1.0, n0: n0s[0] });
    }
    let field = RhoField::new(*v, pairs[0].0.n(), 1e-6)?;
    let data: Vec<(f64, f64, f64)> = exec::map_slice(pairs, |(u, w)| Ok((field.rho(u)?, field.rho(w)?, u.dist(w))))
        .into_iter()
        .collect::<Result<_>>()?;
    fit_from_rho(&data)
}

/// The grid search on precomputed `(ρ(u), ρ(v), |v^{-1}u|)` triples.
pub fn fit_from_rho(data: &[(f64, f64, f64)]) -> Result<RhoComparability> {
    let c0s = c0_grid();
    for &c0 in &c0s {
        for &n0 in &n0_grid() {
            let need = data
                .iter()
                .map(|&(ru, rv, d)| RhoComparability::required_c0(n0, ru, rv, d))
                .fold(1.0, f64::max);
            if need <= c0 * (1.0 + 1e-12) {
                return Ok(RhoComparability { c0, n0 });
            }
        }
    }
    Err(Error::InfeasibleFit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicReport {
    pub checks: usize,
    pub violations: usize,
    /// Smallest `lhs / rhs` encountered.
    pub min_margin: f64,
}

/// Checks `1 + 2^k r/ρ(v) ≥ C0^{−1} (1 + r/ρ(u))^{−N0/(N0+1)} (1 + 2^k r/ρ(u))`
/// for random `v ∈ B(u, r)` and `k = 1..=k_max`.
#[allow(clippy::too_many_arguments)]
pub fn check_dyadic_comparability(
    v: &Potential,
    c0: f64,
    n0: f64,
    u: &GroupElement,
    r: f64,
    k_max: u32,
    trials: usize,
    seed: u64,
) -> Result<DyadicReport> {
    let field = RhoField::new(*v, u.n(), 1e-6)?;
    check_dyadic_comparability_with(&field, c0, n0, u, r, k_max, trials, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn check_dyadic_comparability_with(
    field: &RhoField,
    c0: f64,
    n0: f64,
    u: &GroupElement,
    r: f64,
    k_max: u32,
    trials: usize,
    seed: u64,
) -> Result<DyadicReport> {
    let ball = Ball::new(u.clone(), r)?;
    let mut rng = rng_for(seed, 0xc0de);
    let points: Vec<GroupElement> = (0..trials).map(|_| random_point_in_ball(&mut rng, &ball)).collect();
    let rho_u = field.rho(u)?;
    let rhos = field.rho_many(&points)?;
    let gamma = n0 / (n0 + 1.0);
    let mut report = DyadicReport {
        checks: 0,
        violations: 0,
        min_margin: f64::INFINITY,
    };
    for rho_v in rhos {
        for k in 1..=k_max {
            let big = 2f64.powi(k as i32) * r;
            let lhs = 1.0 + big / rho_v;
            let rhs = (1.0 + r / rho_u).powf(-gamma) * (1.0 + big / rho_u) / c0;
            report.checks += 1;
            report.min_margin = report.min_margin.min(lhs / rhs);
            if lhs < rhs * (1.0 - 1e-12) {
                report.violations += 1;
            }
        }
    }
    Ok(report)
}

/// Random pairs `(u, v)` with `u` in `[−h, h]^{2n+1}` and `|v^{-1}u|`
/// log-uniform in `[d_min, d_max]`.
pub fn random_pairs(n: usize, count: usize, seed: u64, half_width: f64, d_min: f64, d_max: f64) -> Vec<(GroupElement, GroupElement)> {
    let mut rng = rng_for(seed, 0x9a125);
    (0..count)
        .map(|_| {
            let u = random_point_in_box(&mut rng, n, half_width);
            let d = log_uniform(&mut rng, d_min, d_max);
            let h = crate::sampling::random_point_at_norm(&mut rng, n, d);
            let v = u.mul(&h);
            if rng.gen_bool(0.5) {
                (u, v)
            } else {
                (v, u)
            }
        })
        .collect()
}
