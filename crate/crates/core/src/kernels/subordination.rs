//! Time quadrature for `L^{−α/2} = Γ(α/2)^{-1} ∫₀^∞ e^{−sL} s^{α/2−1} ds`.
//!
//! The integral is taken in `σ = ln s` with composite 8-point Gauss–Legendre
//! panels, so `s^{α/2−1} ds = s^{α/2} dσ`. Windows are set relative to a
//! length scale `d`: `[s_min_factor·d², s_max_factor·d²]`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Result};
use crate::quad::composite_gl;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinationSpec {
    pub alpha: f64,
    pub s_min_factor: f64,
    pub s_max_factor: f64,
    pub nodes_per_decade: usize,
}

impl SubordinationSpec {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            s_min_factor: 1e-4,
            s_max_factor: 1e4,
            nodes_per_decade: 16,
        }
    }

    pub fn validate(&self, q: f64) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < q) {
            return Err(invalid(format!("alpha must lie in (0, Q) = (0, {q}), got {}", self.alpha)));
        }
        if !(self.s_min_factor > 0.0 && self.s_min_factor < self.s_max_factor) {
            return Err(invalid("subordination window must satisfy 0 < s_min < s_max"));
        }
        if self.nodes_per_decade < 1 {
            return Err(invalid("at least one node per decade is required"));
        }
        Ok(())
    }

    pub fn gamma_factor(&self) -> f64 {
        1.0 / gamma(self.alpha / 2.0)
    }

    /// Nodes `s_k` and weights `w_k` with `Σ w_k g(s_k) ≈ ∫_{s_min}^{s_max} g(s) s^{-1} ds`.
    pub fn time_rule(&self, s_min: f64, s_max: f64) -> Vec<(f64, f64)> {
        time_rule(s_min, s_max, self.nodes_per_decade)
    }
}

/// Composite Gauss–Legendre rule in `ln s` for `∫_{s_min}^{s_max} g(s) ds/s`.
pub fn time_rule(s_min: f64, s_max: f64, nodes_per_decade: usize) -> Vec<(f64, f64)> {
    let (a, b) = (s_min.ln(), s_max.ln());
    let decades = (b - a) / std::f64::consts::LN_10;
    let panels = ((decades * nodes_per_decade as f64) / 8.0).ceil().max(1.0) as usize;
    composite_gl(a, b, panels, 8).into_iter().map(|(sigma, w)| (sigma.exp(), w)).collect()
}

/// `∫₀^∞ e^{−d²/(As)} s^{(α−Q)/2−1} ds` by the log-time rule on
/// `[s_min_factor·d², s_max_factor·d²]` plus the series for the tail
/// beyond `s_max`; the head below `s_min` is `O(e^{−1/(A·s_min_factor)})`.
pub fn gamma_identity_quadrature(alpha: f64, q: f64, a: f64, d: f64, spec: &SubordinationSpec) -> f64 {
    let beta = (alpha - q) / 2.0;
    let x = d * d / a;
    let s_min = spec.s_min_factor * d * d;
    let s_max = spec.s_max_factor * d * d;
    let body: f64 = spec.time_rule(s_min, s_max).iter().map(|&(s, w)| w * (-x / s).exp() * s.powf(beta)).sum();
    body + power_tail(beta, x, s_max)
}

/// `∫_S^∞ e^{−x/s} s^{β−1} ds` for `β < 0`, `x ≪ S`, by expanding the exponential.
pub fn power_tail(beta: f64, x: f64, s_max: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 0..30 {
        let kf = k as f64;
        let contrib = term * s_max.powf(beta - kf) / (kf - beta);
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs() {
            break;
        }
        term *= -x / (kf + 1.0);
    }
    sum
}

/// Closed form `Γ((Q−α)/2) (A/d²)^{(Q−α)/2}`.
pub fn gamma_identity_exact(alpha: f64, q: f64, a: f64, d: f64) -> f64 {
    let e = (q - alpha) / 2.0;
    gamma(e) * (a / (d * d)).powf(e)
}
