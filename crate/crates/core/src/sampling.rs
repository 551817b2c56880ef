//! Quadrature over Korányi balls.
//!
//! Every rule is built once on the unit ball `B(0, 1)` and transported to
//! `B(u₀, r)` by `ω ↦ u₀·δ_r(ω)`, which maps the unit ball onto the metric
//! ball of the left-invariant distance and multiplies volumes by `r^Q`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::group::{unit_ball_volume, Ball, GroupElement, GroupParams};
use crate::quad::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMethod {
    /// Deterministic tensor rule (Korányi polar coordinates for `n = 1`,
    /// cell midpoints of the bounding box otherwise).
    UniformGrid,
    /// Rejection sampling from the bounding box `[−1,1]^{2n} × [−1,1]`.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: QuadratureMethod,
    /// Nodes per axis for the grid rule, accepted samples for Monte Carlo.
    pub resolution: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            method: QuadratureMethod::UniformGrid,
            resolution: 16,
            seed: 0x5eed,
        }
    }
}

impl QuadratureSpec {
    pub fn grid(resolution: usize) -> Self {
        Self {
            method: QuadratureMethod::UniformGrid,
            resolution,
            seed: 0,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            method: QuadratureMethod::MonteCarlo,
            resolution: samples,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(invalid(format!("quadrature resolution must be at least 2, got {}", self.resolution)));
        }
        Ok(())
    }

    /// Same rule with roughly twice the number of nodes.
    pub fn refined(&self) -> Self {
        let resolution = match self.method {
            QuadratureMethod::UniformGrid => ((self.resolution as f64) * 2f64.cbrt()).ceil() as usize,
            QuadratureMethod::MonteCarlo => 2 * self.resolution,
        };
        Self { resolution, ..*self }
    }
}

/// Seeded generator for stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A quadrature rule on the unit ball, stored as flat `[x, y, t]` coordinates.
#[derive(Debug, Clone)]
pub struct UnitBallRule {
    n: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl UnitBallRule {
    pub fn new(params: GroupParams, spec: &QuadratureSpec) -> Result<Self> {
        Self::with_stream(params, spec, 0)
    }

    pub fn with_stream(params: GroupParams, spec: &QuadratureSpec, stream: u64) -> Result<Self> {
        spec.validate()?;
        let n = params.n();
        Ok(match spec.method {
            QuadratureMethod::UniformGrid if n == 1 => polar_rule_h1(spec.resolution),
            QuadratureMethod::UniformGrid => box_midpoint_rule(params, spec.resolution),
            QuadratureMethod::MonteCarlo => rejection_rule(params, spec.resolution, spec.seed, stream),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_coords(&self, i: usize) -> &[f64] {
        let d = 2 * self.n + 1;
        &self.coords[i * d..(i + 1) * d]
    }

    /// Nodes and weights transported to `b`.
    pub fn map_to(&self, b: &Ball) -> Vec<(GroupElement, f64)> {
        let q = (2 * self.n + 2) as i32;
        let scale = b.radius.powi(q);
        (0..self.len())
            .map(|i| {
                let w = GroupElement::from_coords(self.node_coords(i)).expect("valid node");
                (b.center.mul(&w.dilate(b.radius)), self.weights[i] * scale)
            })
            .collect()
    }

    /// `Σ w_i g(u₀·δ_r ω_i)` without materialising the node list.
    pub fn integrate<F: FnMut(&GroupElement) -> f64>(&self, b: &Ball, mut g: F) -> f64 {
        let q = (2 * self.n + 2) as i32;
        let scale = b.radius.powi(q);
        let mut sum = 0.0;
        for i in 0..self.len() {
            let node = GroupElement::from_coords(self.node_coords(i)).expect("valid node");
            let u = b.center.mul(&node.dilate(b.radius));
            sum += self.weights[i] * g(&u);
        }
        sum * scale
    }
}

fn polar_rule_h1(k: usize) -> UnitBallRule {
    let gl = GaussLegendre::new(k);
    let rho: Vec<(f64, f64)> = gl.mapped(0.0, 1.0).collect();
    let theta: Vec<(f64, f64)> = gl.mapped(-PI / 2.0, PI / 2.0).collect();
    let dphi = 2.0 * PI / k as f64;
    let mut coords = Vec::with_capacity(3 * k * k * k);
    let mut weights = Vec::with_capacity(k * k * k);
    for &(r, wr) in &rho {
        for &(th, wt) in &theta {
            let rz = r * th.cos().max(0.0).sqrt();
            let t = r * r * th.sin();
            for j in 0..k {
                let phi = (j as f64 + 0.5) * dphi;
                coords.extend_from_slice(&[rz * phi.cos(), rz * phi.sin(), t]);
                weights.push(wr * wt * dphi * r.powi(3));
            }
        }
    }
    UnitBallRule { n: 1, coords, weights }
}

fn box_midpoint_rule(params: GroupParams, k: usize) -> UnitBallRule {
    let n = params.n();
    let d = 2 * n + 1;
    let h = 2.0 / k as f64;
    let cell = h.powi(d as i32);
    let total = k.pow(d as u32);
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut p = vec![0.0; d];
    for idx in 0..total {
        let mut rem = idx;
        for c in p.iter_mut() {
            *c = -1.0 + h * ((rem % k) as f64 + 0.5);
            rem /= k;
        }
        let z2: f64 = p[..2 * n].iter().map(|c| c * c).sum();
        if z2 * z2 + p[d - 1] * p[d - 1] < 1.0 {
            coords.extend_from_slice(&p);
            weights.push(cell);
        }
    }
    UnitBallRule { n, coords, weights }
}

fn rejection_rule(params: GroupParams, samples: usize, seed: u64, stream: u64) -> UnitBallRule {
    let n = params.n();
    let mut rng = rng_for(seed, stream);
    let mut coords = Vec::with_capacity(samples * (2 * n + 1));
    let mut p = vec![0.0; 2 * n + 1];
    let mut accepted = 0;
    while accepted < samples {
        for c in p.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        let z2: f64 = p[..2 * n].iter().map(|c| c * c).sum();
        if z2 * z2 + p[2 * n] * p[2 * n] < 1.0 {
            coords.extend_from_slice(&p);
            accepted += 1;
        }
    }
    let w = unit_ball_volume(params) / samples as f64;
    UnitBallRule {
        n,
        coords,
        weights: vec![w; samples],
    }
}

/// Nodes and weights for `∫_B g` (spec stream 0).
pub fn sample_ball(b: &Ball, spec: &QuadratureSpec) -> Result<Vec<(GroupElement, f64)>> {
    let params = GroupParams::new(b.center.n())?;
    Ok(UnitBallRule::new(params, spec)?.map_to(b))
}

/// Uniform point of `B(u₀, r)` by rejection from the bounding box.
pub fn random_point_in_ball<R: Rng>(rng: &mut R, b: &Ball) -> GroupElement {
    let n = b.center.n();
    let mut p = vec![0.0; 2 * n + 1];
    loop {
        for c in p.iter_mut() {
            *c = rng.gen_range(-1.0..1.0);
        }
        let z2: f64 = p[..2 * n].iter().map(|c| c * c).sum();
        if z2 * z2 + p[2 * n] * p[2 * n] < 1.0 {
            let w = GroupElement::from_coords(&p).expect("finite");
            return b.center.mul(&w.dilate(b.radius));
        }
    }
}

/// Uniform point of the box `[−h, h]^{2n+1}`.
pub fn random_point_in_box<R: Rng>(rng: &mut R, n: usize, half_width: f64) -> GroupElement {
    let p: Vec<f64> = (0..2 * n + 1).map(|_| rng.gen_range(-half_width..half_width)).collect();
    GroupElement::from_coords(&p).expect("finite")
}

/// Point at Korányi distance `d` from the identity in a random direction
/// (uniform over the unit sphere `{|ω| = 1}` with respect to surface measure
/// induced by polar coordinates).
pub fn random_point_at_norm<R: Rng>(rng: &mut R, n: usize, d: f64) -> GroupElement {
    let b = Ball::unit(n);
    loop {
        let w = random_point_in_ball(rng, &b);
        let r = w.norm();
        if r > 1e-3 {
            return w.dilate(d / r);
        }
    }
}

/// Log-uniform sample in `[lo, hi]`.
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_weights_sum_to_volume() {
        let p = GroupParams::new(1).unwrap();
        let r = UnitBallRule::new(p, &QuadratureSpec::grid(8)).unwrap();
        let s: f64 = r.weights().iter().sum();
        assert!((s - PI * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn nodes_lie_in_the_ball() {
        let p = GroupParams::new(1).unwrap();
        for spec in [QuadratureSpec::grid(6), QuadratureSpec::monte_carlo(500, 3)] {
            let b = Ball::new(GroupElement::h1(1.0, -2.0, 3.0), 0.7).unwrap();
            let rule = UnitBallRule::new(p, &spec).unwrap();
            for (u, w) in rule.map_to(&b) {
                assert!(b.center.dist(&u) <= 0.7 * (1.0 + 1e-12));
                assert!(w > 0.0);
            }
        }
    }

    #[test]
    fn too_small_resolution_is_rejected() {
        assert!(sample_ball(&Ball::unit(1), &QuadratureSpec::grid(1)).is_err());
    }

    #[test]
    fn higher_dimensional_grid_volume() {
        let p = GroupParams::new(2).unwrap();
        let r = UnitBallRule::new(p, &QuadratureSpec::grid(14)).unwrap();
        let s: f64 = r.weights().iter().sum();
        assert!((s / unit_ball_volume(p) - 1.0).abs() < 0.03);
    }
}
