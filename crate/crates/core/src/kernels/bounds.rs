//! Empirical constants for the size and smoothness estimates of `P_s` and `K_α`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::group::GroupElement;
use crate::kernels::fractional::{damped_riesz_kernel, KernelField};
use crate::kernels::heat::{heat_kernel, HeatQuadrature};
use crate::kernels::propagator::TrotterSpec;
use crate::kernels::SubordinationSpec;
use crate::potential::{Potential, RhoField};
use crate::sampling::{log_uniform, random_point_at_norm, random_point_in_box, rng_for};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundFit {
    /// Decay exponent `N` of the `(1 + d/ρ)` factor.
    pub n_decay: f64,
    /// Smallest constant making the bound hold on the sample.
    pub c_fit: f64,
    /// Gaussian rate, for bounds that carry one.
    pub a_fit: Option<f64>,
    pub delta: Option<f64>,
    pub samples: usize,
}

impl BoundFit {
    /// Relative change of `c_fit` between a sample and its doubled extension.
    pub fn drift(&self, doubled: &BoundFit) -> f64 {
        (doubled.c_fit - self.c_fit).abs() / self.c_fit.max(doubled.c_fit)
    }
}

/// `K_α(u, v)` for a catalog potential.
///
/// Zero and constant potentials use the exact quadrature route
/// `Γ(α/2)^{-1} ∫ e^{−cs} H_s(v^{-1}u) s^{α/2−1} ds`; homogeneous powers use a
/// [`KernelField`] with the pole at the identity.
pub enum KernelEvaluator {
    Quadrature {
        alpha: f64,
        c: f64,
        sub: SubordinationSpec,
        hq: HeatQuadrature,
    },
    Grid(KernelField),
}

impl KernelEvaluator {
    pub fn new(v: &Potential, alpha: f64, n: usize, d_min: f64, d_max: f64, sub: &SubordinationSpec, ts: &TrotterSpec) -> Result<Self> {
        v.validate()?;
        match v.constant_value() {
            Some(c) => {
                SubordinationSpec { alpha, ..*sub }.validate((2 * n + 2) as f64)?;
                Ok(Self::Quadrature {
                    alpha,
                    c,
                    sub: *sub,
                    hq: HeatQuadrature::default(),
                })
            }
            None => Ok(Self::Grid(KernelField::build(v, alpha, n, d_min, d_max, sub, ts)?)),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Self::Quadrature { alpha, .. } => *alpha,
            Self::Grid(f) => f.alpha(),
        }
    }

    pub fn kernel(&self, u: &GroupElement, v: &GroupElement) -> Result<f64> {
        match self {
            Self::Quadrature { alpha, c, sub, hq } => damped_riesz_kernel(*alpha, *c, &v.inverse().mul(u), sub, hq),
            Self::Grid(f) => f.kernel(u, v),
        }
    }
}

fn decay(d: f64, rho: f64, n_decay: f64) -> f64 {
    if rho.is_infinite() {
        1.0
    } else {
        (1.0 + d / rho).powf(n_decay)
    }
}

fn bound_value(ev: &KernelEvaluator, rho: &RhoField, n_decay: f64, u: &GroupElement, v: &GroupElement) -> Result<f64> {
    let d = u.dist(v);
    if d == 0.0 {
        return Err(invalid("kernel bound pairs must avoid the diagonal"));
    }
    let q = (2 * u.n() + 2) as f64;
    Ok(ev.kernel(u, v)? * d.powf(q - ev.alpha()) * decay(d, rho.rho(u)?, n_decay))
}

fn smoothness_value(
    ev: &KernelEvaluator,
    rho: &RhoField,
    delta: f64,
    n_decay: f64,
    u: &GroupElement,
    v: &GroupElement,
    w: &GroupElement,
) -> Result<f64> {
    let h = u.dist(v);
    let d = u.dist(w);
    if h > 0.5 * d * (1.0 + 1e-12) {
        return Err(invalid(format!("triple violates |v^-1 u| <= |w^-1 u|/2 ({h} vs {d})")));
    }
    if h == 0.0 {
        return Ok(0.0);
    }
    let q = (2 * u.n() + 2) as f64;
    let diff = (ev.kernel(u, w)? - ev.kernel(v, w)?).abs();
    Ok(diff * d.powf(q - ev.alpha() + delta) * decay(d, rho.rho(u)?, n_decay) / h.powf(delta))
}

fn max_of(values: Vec<Result<f64>>) -> Result<f64> {
    values.into_iter().try_fold(0.0f64, |m, x| x.map(|x| m.max(x)))
}

/// `C_fit = max K_α(u,v) |v^{-1}u|^{Q−α} (1 + |v^{-1}u|/ρ(u))^N` over `pairs`.
pub fn check_kernel_bound(ev: &KernelEvaluator, rho: &RhoField, n_decay: f64, pairs: &[(GroupElement, GroupElement)]) -> Result<BoundFit> {
    if pairs.is_empty() {
        return Err(invalid("no pairs to test"));
    }
    let c_fit = max_of(exec::map_slice(pairs, |(u, v)| bound_value(ev, rho, n_decay, u, v)))?;
    Ok(BoundFit {
        n_decay,
        c_fit,
        a_fit: None,
        delta: None,
        samples: pairs.len(),
    })
}

/// `C_fit = max |K_α(u,w) − K_α(v,w)| |w^{-1}u|^{Q−α+δ} (1 + |w^{-1}u|/ρ(u))^N / |v^{-1}u|^δ`
/// over triples with `|v^{-1}u| ≤ |w^{-1}u|/2`.
pub fn check_kernel_smoothness(
    ev: &KernelEvaluator,
    rho: &RhoField,
    delta: f64,
    n_decay: f64,
    triples: &[(GroupElement, GroupElement, GroupElement)],
) -> Result<BoundFit> {
    if !(delta > 0.0) {
        return Err(invalid("smoothness exponent must be positive"));
    }
    let c_fit = max_of(exec::map_slice(triples, |(u, v, w)| smoothness_value(ev, rho, delta, n_decay, u, v, w)))?;
    Ok(BoundFit {
        n_decay,
        c_fit,
        a_fit: None,
        delta: Some(delta),
        samples: triples.len(),
    })
}

/// Local search polishing a sample maximum: from each of the `starts` best
/// samples, `iterations` seeded random steps whose size halves six times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Refinement {
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for Refinement {
    fn default() -> Self {
        Self {
            starts: 3,
            iterations: 600,
            seed: 1,
        }
    }
}

/// Homogeneous perturbation of `x`: coordinates move by `step·scale`, `t` by `step·scale²`.
fn perturb<R: Rng>(rng: &mut R, x: &GroupElement, scale: f64, step: f64) -> GroupElement {
    let m = x.coords().len();
    let c: Vec<f64> = x
        .coords()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let s = if i + 1 == m { scale * scale } else { scale };
            v + step * s * rng.gen_range(-1.0..1.0)
        })
        .collect();
    GroupElement::from_coords(&c).expect("finite")
}

fn clamp_norm(x: GroupElement, lo: f64, hi: f64) -> GroupElement {
    let r = x.norm();
    if r > hi {
        x.dilate(hi / r)
    } else if r < lo && r > 0.0 {
        x.dilate(lo / r)
    } else {
        x
    }
}

/// Maximises `value(i, a, h)` from starts `(i, a, h)`, with `d_min ≤ |a| ≤ d_max`
/// and `|h| ≤ |a|/2`.
fn refine<F>(starts: Vec<(usize, GroupElement, GroupElement)>, d_min: f64, d_max: f64, r: &Refinement, value: F) -> Result<f64>
where
    F: Fn(usize, &GroupElement, &GroupElement) -> Result<f64> + Sync,
{
    let phases = 6;
    let per_phase = r.iterations.div_ceil(phases).max(1);
    let results = exec::map_range(starts.len(), |k| -> Result<f64> {
        let mut rng = rng_for(r.seed, 0x4ef1 + k as u64);
        let (i, mut a, mut h) = starts[k].clone();
        let mut best = value(i, &a, &h)?;
        let mut step = 0.2;
        for _ in 0..phases {
            for _ in 0..per_phase {
                let a2 = clamp_norm(perturb(&mut rng, &a, a.norm(), step), d_min, d_max);
                let h2 = clamp_norm(perturb(&mut rng, &h, a2.norm(), step), 0.0, 0.5 * a2.norm());
                let v = value(i, &a2, &h2)?;
                if v > best {
                    best = v;
                    a = a2;
                    h = h2;
                }
            }
            step *= 0.5;
        }
        Ok(best)
    });
    max_of(results)
}

fn top_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    idx.truncate(k);
    idx
}

/// [`check_kernel_bound`] followed by a local search from the best pairs,
/// moving `u = v·a` with `d_min ≤ |a| ≤ d_max` and `v` fixed.
pub fn refine_kernel_bound(
    ev: &KernelEvaluator,
    rho: &RhoField,
    n_decay: f64,
    pairs: &[(GroupElement, GroupElement)],
    d_min: f64,
    d_max: f64,
    r: &Refinement,
) -> Result<BoundFit> {
    if pairs.is_empty() {
        return Err(invalid("no pairs to test"));
    }
    let values: Vec<f64> = exec::map_slice(pairs, |(u, v)| bound_value(ev, rho, n_decay, u, v))
        .into_iter()
        .collect::<Result<_>>()?;
    let starts = top_indices(&values, r.starts)
        .into_iter()
        .map(|i| (i, pairs[i].1.inverse().mul(&pairs[i].0), GroupElement::identity(pairs[i].0.n())))
        .collect();
    let best = refine(starts, d_min, d_max, r, |i, a, _| {
        let v = &pairs[i].1;
        bound_value(ev, rho, n_decay, &v.mul(a), v)
    })?;
    Ok(BoundFit {
        n_decay,
        c_fit: values.iter().copied().fold(best, f64::max),
        a_fit: None,
        delta: None,
        samples: pairs.len(),
    })
}

/// [`check_kernel_smoothness`] followed by a local search from the best
/// triples, moving `u = w·a` and `v = u·h` with `w` fixed.
#[allow(clippy::too_many_arguments)]
pub fn refine_kernel_smoothness(
    ev: &KernelEvaluator,
    rho: &RhoField,
    delta: f64,
    n_decay: f64,
    triples: &[(GroupElement, GroupElement, GroupElement)],
    d_min: f64,
    d_max: f64,
    r: &Refinement,
) -> Result<BoundFit> {
    let base = check_kernel_smoothness(ev, rho, delta, n_decay, triples)?;
    let values: Vec<f64> = exec::map_slice(triples, |(u, v, w)| smoothness_value(ev, rho, delta, n_decay, u, v, w))
        .into_iter()
        .collect::<Result<_>>()?;
    let starts = top_indices(&values, r.starts)
        .into_iter()
        .map(|i| {
            let (u, v, w) = &triples[i];
            (i, w.inverse().mul(u), u.inverse().mul(v))
        })
        .collect();
    let best = refine(starts, d_min, d_max, r, |i, a, h| {
        let w = &triples[i].2;
        let u = w.mul(a);
        smoothness_value(ev, rho, delta, n_decay, &u, &u.mul(h), w)
    })?;
    let c_fit = base.c_fit.max(best);
    Ok(BoundFit { c_fit, ..base })
}

/// Smoothness ratios along a shrinking family `v = u·h_k`, `|h_k| = 2^{−k}|w^{-1}u|/2`.
/// For `δ` above the true Lipschitz order the sequence grows without bound.
pub fn smoothness_probe(
    ev: &KernelEvaluator,
    delta: f64,
    u: &GroupElement,
    w: &GroupElement,
    direction: &GroupElement,
    k_max: usize,
) -> Result<Vec<f64>> {
    let d = u.dist(w);
    let unit = direction.dilate(1.0 / direction.norm());
    let base = ev.kernel(u, w)?;
    (0..k_max)
        .map(|k| {
            let h = 0.5 * d * 0.5f64.powi(k as i32);
            let v = u.mul(&unit.dilate(h));
            Ok((ev.kernel(&v, w)? - base).abs() / h.powf(delta))
        })
        .collect()
}

/// Local Hölder order of `K_α(·, w)` at `u`: the log-log slope of
/// `|K(u·h_k, w) − K(u, w)|` against `|h_k|` over the two smallest steps of a
/// shrinking family.
pub fn fit_smoothness_exponent(ev: &KernelEvaluator, u: &GroupElement, w: &GroupElement, direction: &GroupElement, k_max: usize) -> Result<f64> {
    if k_max < 2 {
        return Err(invalid("the probe needs at least two steps"));
    }
    let diffs = smoothness_probe(ev, 0.0, u, w, direction, k_max)?;
    let (a, b) = (diffs[k_max - 2], diffs[k_max - 1]);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::NonConvergence("kernel differences vanished along the probe".into()));
    }
    Ok((a / b).log2())
}

/// Random pairs `(u, v)` with `|v^{-1}u|` log-uniform in `[d_min, d_max]`.
/// For non-invariant potentials `v` is the identity (the pole of `V`).
pub fn kernel_pairs(v: &Potential, n: usize, count: usize, seed: u64, d_min: f64, d_max: f64) -> Vec<(GroupElement, GroupElement)> {
    let mut rng = rng_for(seed, 0x9a1e);
    (0..count)
        .map(|_| {
            let d = log_uniform(&mut rng, d_min, d_max);
            let w = random_point_at_norm(&mut rng, n, d);
            if v.is_translation_invariant() {
                let base = random_point_in_box(&mut rng, n, 5.0);
                (base.mul(&w), base)
            } else {
                (w, GroupElement::identity(n))
            }
        })
        .collect()
}

/// Random triples `(u, v, w)` with `|w^{-1}u|` log-uniform in `[d_min, d_max]`
/// and `|v^{-1}u| / |w^{-1}u|` log-uniform in `[1e−2, 1/2]`.
pub fn smoothness_triples(
    v: &Potential,
    n: usize,
    count: usize,
    seed: u64,
    d_min: f64,
    d_max: f64,
) -> Vec<(GroupElement, GroupElement, GroupElement)> {
    let mut rng = rng_for(seed, 0x7219);
    (0..count)
        .map(|_| {
            let d = log_uniform(&mut rng, d_min, d_max);
            let ratio = log_uniform(&mut rng, 1e-2, 0.5);
            let w = if v.is_translation_invariant() {
                random_point_in_box(&mut rng, n, 5.0)
            } else {
                GroupElement::identity(n)
            };
            let u = w.mul(&random_point_at_norm(&mut rng, n, d));
            let h = random_point_at_norm(&mut rng, n, ratio * d);
            (u.clone(), u.mul(&h), w)
        })
        .collect()
}

/// On-diagonal decay: `C_fit = max_s s^{Q/2} P_s(u,u) (1 + √s/ρ(u))^N` over
/// the supplied `(s, P_s(u,u))` values.
pub fn check_diagonal_decay(n: usize, rho_u: f64, n_decay: f64, values: &[(f64, f64)]) -> Result<BoundFit> {
    if values.is_empty() {
        return Err(invalid("no times to test"));
    }
    let q = (2 * n + 2) as f64;
    let c_fit = values
        .iter()
        .map(|&(s, p)| s.powf(q / 2.0) * p * decay(s.sqrt(), rho_u, n_decay))
        .fold(0.0, f64::max);
    Ok(BoundFit {
        n_decay,
        c_fit,
        a_fit: None,
        delta: None,
        samples: values.len(),
    })
}

/// `P_s(u, u)` for a constant potential on a log grid of `count` times in `[s_lo, s_hi]`.
pub fn constant_diagonal(c: f64, n: usize, s_lo: f64, s_hi: f64, count: usize) -> Result<Vec<(f64, f64)>> {
    if count < 2 || !(s_lo > 0.0 && s_lo < s_hi) {
        return Err(invalid("diagonal grid needs at least two times in 0 < s_lo < s_hi"));
    }
    let hq = HeatQuadrature::default();
    let o = GroupElement::identity(n);
    (0..count)
        .map(|k| {
            let s = s_lo * (s_hi / s_lo).powf(k as f64 / (count - 1) as f64);
            Ok((s, (-c * s).exp() * heat_kernel(s, &o, &hq)?))
        })
        .collect()
}

/// One sample of the semigroup smoothness estimate: `(s, u, h, v)`.
pub type SmoothnessSample = (f64, GroupElement, GroupElement, GroupElement);

/// Samples with `s` log-uniform in `[s_lo, s_hi]`, `|v^{-1}u| = x√s` with `x`
/// log-uniform in `[0.1, 3]` and `|h|/|v^{-1}u|` log-uniform in `[1e−2, 1/2]`.
/// For non-invariant potentials `v` is the identity.
pub fn semigroup_samples(v: &Potential, n: usize, count: usize, seed: u64, s_lo: f64, s_hi: f64) -> Vec<SmoothnessSample> {
    let mut rng = rng_for(seed, 0x5e41);
    (0..count)
        .map(|_| {
            let s = log_uniform(&mut rng, s_lo, s_hi);
            let d = log_uniform(&mut rng, 0.1, 3.0) * s.sqrt();
            let ratio = log_uniform(&mut rng, 1e-2, 0.5);
            let base = if v.is_translation_invariant() {
                random_point_in_box(&mut rng, n, 5.0)
            } else {
                GroupElement::identity(n)
            };
            let u = base.mul(&random_point_at_norm(&mut rng, n, d));
            let h = random_point_at_norm(&mut rng, n, ratio * d);
            (s, u, h, base)
        })
        .collect()
}

/// `C_fit = max |P_s(u·h, v) − P_s(u, v)| / ((|h|/√s)^δ s^{−Q/2} e^{−|v^{-1}u|²/(As)}
/// (1 + √s/ρ(u) + √s/ρ(v))^{−N})` with `P_s` supplied by `p`.
pub fn check_semigroup_smoothness<P>(p: P, rho: &RhoField, a: f64, delta: f64, n_decay: f64, samples: &[SmoothnessSample]) -> Result<BoundFit>
where
    P: Fn(f64, &GroupElement, &GroupElement) -> Result<f64> + Sync,
{
    if !(a > 0.0 && delta > 0.0) {
        return Err(invalid("Gaussian rate and smoothness exponent must be positive"));
    }
    let values = exec::map_slice(samples, |(s, u, h, v)| -> Result<f64> {
        let d = u.dist(v);
        let hn = h.norm();
        if hn > 0.5 * d * (1.0 + 1e-12) {
            return Err(invalid("semigroup smoothness needs |h| <= |v^-1 u|/2"));
        }
        if hn == 0.0 {
            return Ok(0.0);
        }
        let q = (2 * u.n() + 2) as f64;
        let diff = (p(*s, &u.mul(h), v)? - p(*s, u, v)?).abs();
        let root = s.sqrt();
        let damp = {
            let (ru, rv) = (rho.rho(u)?, rho.rho(v)?);
            let extra = if ru.is_infinite() { 0.0 } else { root / ru } + if rv.is_infinite() { 0.0 } else { root / rv };
            (1.0 + extra).powf(-n_decay)
        };
        let bound = (hn / root).powf(delta) * s.powf(-q / 2.0) * (-d * d / (a * s)).exp() * damp;
        Ok(diff / bound)
    });
    let c_fit = values.into_iter().try_fold(0.0f64, |m, x| x.map(|x| m.max(x)))?;
    Ok(BoundFit {
        n_decay,
        c_fit,
        a_fit: Some(a),
        delta: Some(delta),
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coincident_points_contribute_nothing() {
        let sub = SubordinationSpec::new(1.0);
        let ev = KernelEvaluator::new(&Potential::Zero, 1.0, 1, 1.0, 1.0, &sub, &TrotterSpec::default()).unwrap();
        let u = GroupElement::h1(0.3, 0.1, 0.2);
        let w = GroupElement::h1(2.0, -1.0, 0.5);
        let fit = check_kernel_smoothness(&ev, &RhoField::free(), 1.0, 0.0, &[(u.clone(), u, w)]).unwrap();
        assert_eq!(fit.c_fit, 0.0);
    }

    #[test]
    fn separation_precondition_is_enforced() {
        let sub = SubordinationSpec::new(1.0);
        let ev = KernelEvaluator::new(&Potential::Zero, 1.0, 1, 1.0, 1.0, &sub, &TrotterSpec::default()).unwrap();
        let u = GroupElement::h1(0.0, 0.0, 0.0);
        let v = GroupElement::h1(0.9, 0.0, 0.0);
        let w = GroupElement::h1(1.0, 0.0, 0.0);
        assert!(check_kernel_smoothness(&ev, &RhoField::free(), 1.0, 0.0, &[(u, v, w)]).is_err());
    }

    #[test]
    fn free_kernel_is_lipschitz_off_the_diagonal() {
        let sub = SubordinationSpec::new(1.0);
        let ev = KernelEvaluator::new(&Potential::Zero, 1.0, 1, 1.0, 1.0, &sub, &TrotterSpec::default()).unwrap();
        let u = GroupElement::h1(1.0, 0.5, 0.3);
        let w = GroupElement::identity(1);
        let dir = GroupElement::h1(0.6, -0.8, 0.0);
        let order = fit_smoothness_exponent(&ev, &u, &w, &dir, 8).unwrap();
        assert!((order - 1.0).abs() < 0.1, "{order}");
        let probe = smoothness_probe(&ev, 1.5, &u, &w, &dir, 8).unwrap();
        assert!(probe[7] > 4.0 * probe[1], "{probe:?}");
    }
}
