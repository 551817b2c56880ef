//! The heat kernel of the sub-Laplacian via its λ-integral representation.
//!
//! For the group law used throughout the crate the kernel is
//!
//! ```text
//! H_s(z, t) = (2π)^{-1} (4π)^{-n} ∫ (|λ|/sinh(|λ|s))^n exp(−|λ||z|² coth(|λ|s)/4) e^{iλt} dλ   (Printed)
//! H_s(z, t) = ¼ · Printed(s, z, t/4)                                                           (GroupLaw)
//! ```
//!
//! `Printed` is the textbook expression written for the vector fields
//! `∂x ± ½y∂t`; with `X = ∂x + 2y∂t`, `Y = ∂y − 2x∂t` the time variable is
//! rescaled by four. Only `GroupLaw` solves `∂_s H = ΔH` for the group law of
//! [`crate::group`], and it is the convention used by every other module.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::group::GroupElement;
use crate::quad::{composite_gl, integrate_adaptive, AdaptiveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HeatConvention {
    #[default]
    GroupLaw,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatQuadrature {
    /// The λ-range is `[0, lambda_cutoff / (n s + |z|²/4)]`: the integrand
    /// has decayed by `e^{-lambda_cutoff}` there.
    pub lambda_cutoff: f64,
    /// Node count of the fixed rule used when `adaptive` is false.
    pub lambda_nodes: usize,
    pub adaptive: bool,
    /// Evaluation budget of the adaptive rule.
    pub max_evals: usize,
    pub rel_tol: f64,
    pub convention: HeatConvention,
    /// Points with `max(|z|², π|t|)/s` above this are returned as 0. That
    /// quantity bounds `d_cc(u)²/s` from below, so the Gaussian bound puts
    /// `H_s(u)` below `e^{−45} s^{−Q/2}` there, while the λ-integral is pure
    /// cancellation and cannot be resolved in double precision.
    pub flush_ratio: f64,
}

impl Default for HeatQuadrature {
    fn default() -> Self {
        Self {
            lambda_cutoff: 45.0,
            lambda_nodes: 256,
            adaptive: true,
            max_evals: 4096,
            rel_tol: 1e-13,
            convention: HeatConvention::GroupLaw,
            flush_ratio: 200.0,
        }
    }
}

impl HeatQuadrature {
    pub fn printed() -> Self {
        Self {
            convention: HeatConvention::Printed,
            ..Self::default()
        }
    }
}

/// `ln(x / sinh x)` for `x ≥ 0`.
fn ln_x_over_sinh(x: f64) -> f64 {
    if x < 1e-4 {
        -x * x / 6.0
    } else if x < 1.0 {
        (x / x.sinh()).ln()
    } else {
        (2.0 * x).ln() - x - (-(-2.0 * x).exp()).ln_1p()
    }
}

/// `x coth x` for `x ≥ 0`.
fn x_coth_x(x: f64) -> f64 {
    if x < 1e-4 {
        1.0 + x * x / 3.0
    } else {
        x / x.tanh()
    }
}

/// Integrand envelope `(λ/sinh λs)^n exp(−λ|z|² coth(λs)/4)`.
fn envelope(n: usize, s: f64, z2: f64, lambda: f64) -> f64 {
    let x = lambda * s;
    let log = n as f64 * (ln_x_over_sinh(x) - s.ln()) - z2 * x_coth_x(x) / (4.0 * s);
    log.exp()
}

/// `(2π)^{-1}(4π)^{-n} ∫_R envelope(λ) cos(λτ) dλ`.
fn printed_integral(n: usize, s: f64, z2: f64, tau: f64, hq: &HeatQuadrature) -> Result<f64> {
    let lmax = hq.lambda_cutoff / (n as f64 * s + z2 / 4.0);
    let norm = 2.0 / (2.0 * PI * (4.0 * PI).powi(n as i32));
    let osc = |l: f64| envelope(n, s, z2, l) * (l * tau).cos();
    let env = |l: f64| envelope(n, s, z2, l);
    if !hq.adaptive {
        let panels = hq.lambda_nodes.div_ceil(8).max(1);
        let rule = composite_gl(0.0, lmax, panels, 8);
        let v: f64 = rule.iter().map(|&(l, w)| w * osc(l)).sum();
        return Ok(norm * v);
    }
    let periods = (lmax * tau.abs() / (2.0 * PI)).ceil() as usize;
    let initial = (2 * periods + 2).max(4);
    if 15 * initial > hq.max_evals {
        return Err(Error::NonConvergence(format!(
            "heat kernel at s={s:e}, |z|²={z2:e}, t={tau:e} needs {} oscillation panels, over the {} evaluation budget",
            initial, hq.max_evals
        )));
    }
    let scale = if tau == 0.0 {
        None
    } else {
        let opts = AdaptiveOptions {
            abs_tol: 0.0,
            rel_tol: 1e-6,
            max_evals: hq.max_evals,
        };
        Some(integrate_adaptive(env, 0.0, lmax, 4, opts)?.value)
    };
    let opts = AdaptiveOptions {
        abs_tol: scale.map_or(0.0, |m| hq.rel_tol * m),
        rel_tol: hq.rel_tol,
        max_evals: hq.max_evals,
    };
    let est = integrate_adaptive(osc, 0.0, lmax, initial, opts)?;
    let value = norm * est.value;
    if value < 0.0 {
        // Compare with the natural size s^{−Q/2} of the kernel: far in the
        // Gaussian tail the integral is cancellation noise around zero.
        let magnitude = norm * s.powi(-(n as i32 + 1));
        if value.abs() < 1e-12 * magnitude {
            return Ok(0.0);
        }
        return Err(Error::NonConvergence(format!(
            "heat kernel quadrature returned {value:e} at s={s:e}, t={tau:e}"
        )));
    }
    Ok(value)
}

/// `H_s` at a point given by `|z|²` and `t`.
pub fn heat_kernel_zt(n: usize, s: f64, z2: f64, t: f64, hq: &HeatQuadrature) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("heat time must be positive, got {s}")));
    }
    let t_group = match hq.convention {
        HeatConvention::GroupLaw => t,
        HeatConvention::Printed => 4.0 * t,
    };
    if z2.max(PI * t_group.abs()) > hq.flush_ratio * s {
        return Ok(0.0);
    }
    match hq.convention {
        HeatConvention::Printed => printed_integral(n, s, z2, t, hq),
        HeatConvention::GroupLaw => Ok(0.25 * printed_integral(n, s, z2, t / 4.0, hq)?),
    }
}

pub fn heat_kernel(s: f64, u: &GroupElement, hq: &HeatQuadrature) -> Result<f64> {
    heat_kernel_zt(u.n(), s, u.z_norm_sq(), u.t(), hq)
}

/// `H_s(0, 0) = (64 s²)^{-1}` for `n = 1` under the group law
/// (`(16 s²)^{-1}` for the printed convention).
pub fn heat_kernel_origin_h1(s: f64, convention: HeatConvention) -> f64 {
    match convention {
        HeatConvention::GroupLaw => 1.0 / (64.0 * s * s),
        HeatConvention::Printed => 1.0 / (16.0 * s * s),
    }
}

/// Partial Fourier transform in `t` of the group-law heat kernel,
/// `∫ H_s(z, t) e^{−iμt} dt = (|μ|/(π sinh 4|μ|s))^n exp(−|μ| coth(4|μ|s) |z|²)`.
pub fn heat_kernel_t_fourier(n: usize, s: f64, r: f64, mu: f64) -> f64 {
    let m = mu.abs();
    let x = 4.0 * m * s;
    let log = n as f64 * (ln_x_over_sinh(x) - (4.0 * PI * s).ln()) - x_coth_x(x) * r * r / (4.0 * s);
    log.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub c: f64,
    pub a: f64,
    pub samples: usize,
}

/// Fit `H_s(u) ≤ C s^{−Q/2} exp(−|u|²/(A s))`.
///
/// For each `A` on a log grid the smallest admissible `C(A)` is the sample
/// maximum; the reported `A` minimises the mass `C(A) A^{Q/2}` of the
/// majorant (making `C` alone minimal would always push `A` to the top of
/// the grid). The maximum at the chosen `A` is then refined by a local
/// search in the scale-free variables `(|z|/√s, t/s)`.
pub fn fit_gaussian_bound(hq: &HeatQuadrature, sample: &[(f64, GroupElement)]) -> Result<GaussianFit> {
    if sample.is_empty() {
        return Err(invalid("empty sample"));
    }
    let n = sample[0].1.n();
    let qh = (n + 1) as f64;
    let scaled: Vec<(f64, f64, f64)> = sample
        .iter()
        .map(|(s, u)| {
            let h = heat_kernel(*s, u, hq)?;
            let w = u.dilate(1.0 / s.sqrt());
            Ok((s.powf(qh) * h, w.z_norm_sq().sqrt(), w.t()))
        })
        .collect::<Result<_>>()?;
    let ratio_max = |a: f64| {
        scaled
            .iter()
            .map(|&(h, r, t)| h * ((r.powi(4) + t * t).sqrt() / a).exp())
            .fold(0.0, f64::max)
    };
    let grid: Vec<f64> = (0..96).map(|k| 0.5 * 512f64.powf(k as f64 / 95.0)).collect();
    let mut best = (f64::INFINITY, grid[0]);
    for &a in &grid {
        let mass = ratio_max(a) * a.powf(qh);
        if mass < best.0 {
            best = (mass, a);
        }
    }
    let a = best.1;
    let c = refine_max(n, a, &scaled, hq)?.max(ratio_max(a));
    Ok(GaussianFit { c, a, samples: sample.len() })
}

fn refine_max(n: usize, a: f64, scaled: &[(f64, f64, f64)], hq: &HeatQuadrature) -> Result<f64> {
    let objective = |r: f64, t: f64| -> Result<f64> {
        let r = r.abs();
        let h = heat_kernel_zt(n, 1.0, r * r, t, hq)?;
        Ok(h * ((r.powi(4) + t * t).sqrt() / a).exp())
    };
    let (mut r, mut t, mut best) = scaled
        .iter()
        .map(|&(h, r, t)| (r, t, h * ((r.powi(4) + t * t).sqrt() / a).exp()))
        .fold((0.0, 0.0, f64::NEG_INFINITY), |acc, x| if x.2 > acc.2 { x } else { acc });
    let mut step = 0.25 * (1.0 + r);
    while step > 1e-6 {
        let mut moved = false;
        for (dr, dt) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let v = objective(r + dr, t + dt)?;
            if v > best {
                best = v;
                r = (r + dr).abs();
                t += dt;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_closed_forms() {
        for s in [0.1, 1.0, 10.0] {
            for conv in [HeatConvention::GroupLaw, HeatConvention::Printed] {
                let hq = HeatQuadrature {
                    convention: conv,
                    ..Default::default()
                };
                let v = heat_kernel(s, &GroupElement::identity(1), &hq).unwrap();
                let exact = heat_kernel_origin_h1(s, conv);
                assert!((v / exact - 1.0).abs() < 1e-10, "s={s} {conv:?}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn t_axis_closed_form() {
        // H_s(0, t) = sech²(πt/(8s)) / (64 s²) under the group law.
        let hq = HeatQuadrature::default();
        for (s, t) in [(1.0, 0.5), (1.0, 3.0), (0.3, 2.0), (2.0, -7.0)] {
            let v = heat_kernel(s, &GroupElement::h1(0.0, 0.0, t), &hq).unwrap();
            let c = (PI * t / (8.0 * s)).cosh();
            let exact = 1.0 / (64.0 * s * s * c * c);
            assert!((v / exact - 1.0).abs() < 1e-9, "{s} {t}: {v} {exact}");
        }
    }

    #[test]
    fn fourier_transform_matches_lambda_integral() {
        // Inverse transform of the closed form at t = 0 equals H_s(z, 0).
        let (s, r) = (0.7, 0.9);
        let v: f64 = composite_gl(0.0, 60.0, 60, 10)
            .iter()
            .map(|&(m, w)| w * heat_kernel_t_fourier(1, s, r, m))
            .sum::<f64>()
            / PI;
        let h = heat_kernel(s, &GroupElement::h1(r, 0.0, 0.0), &HeatQuadrature::default()).unwrap();
        assert!((v / h - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nonpositive_time_is_rejected() {
        assert!(heat_kernel(0.0, &GroupElement::identity(1), &HeatQuadrature::default()).is_err());
    }
}
