//! Group law, Korányi geometry and left-invariant derivatives on `H^n`.
//!
//! A point is stored as `2n + 1` reals laid out `[x_1..x_n, y_1..y_n, t]`.
//! The group law is
//! `(z, t)·(z', t') = (z + z', t + t' + 2 Im(z·conj z'))` with
//! `Im(z·conj z') = Σ_j (y_j x'_j − x_j y'_j)`.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::functions::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupParams {
    n: usize,
}

impl GroupParams {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("complex dimension n must be at least 1"));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Homogeneous dimension `Q = 2n + 2`.
    pub fn q(&self) -> usize {
        2 * self.n + 2
    }

    pub fn q_f64(&self) -> f64 {
        self.q() as f64
    }
}

impl Default for GroupParams {
    fn default() -> Self {
        Self { n: 1 }
    }
}

/// Serialised as the flat coordinate array `[x₁…xₙ, y₁…yₙ, t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct GroupElement {
    coords: SmallVec<[f64; 3]>,
}

impl TryFrom<Vec<f64>> for GroupElement {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::from_coords(&coords)
    }
}

impl From<GroupElement> for Vec<f64> {
    fn from(u: GroupElement) -> Self {
        u.coords.to_vec()
    }
}

impl GroupElement {
    pub fn new(x: &[f64], y: &[f64], t: f64) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(invalid("x and y must be nonempty and of equal length"));
        }
        let mut coords: SmallVec<[f64; 3]> = SmallVec::with_capacity(2 * x.len() + 1);
        coords.extend_from_slice(x);
        coords.extend_from_slice(y);
        coords.push(t);
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coordinates must be finite"));
        }
        Ok(Self { coords })
    }

    /// Point of `H^1` from `(x, y, t)`.
    pub fn h1(x: f64, y: f64, t: f64) -> Self {
        Self {
            coords: smallvec::smallvec![x, y, t],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            coords: smallvec::smallvec![0.0; 2 * n + 1],
        }
    }

    /// Build from the raw `[x, y, t]` layout.
    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        if coords.len() < 3 || coords.len().is_multiple_of(2) {
            return Err(invalid("coordinate vector must have odd length 2n+1 >= 3"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coordinates must be finite"));
        }
        Ok(Self {
            coords: SmallVec::from_slice(coords),
        })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn n(&self) -> usize {
        (self.coords.len() - 1) / 2
    }

    pub fn x(&self) -> &[f64] {
        &self.coords[..self.n()]
    }

    pub fn y(&self) -> &[f64] {
        let n = self.n();
        &self.coords[n..2 * n]
    }

    pub fn t(&self) -> f64 {
        self.coords[2 * self.n()]
    }

    /// `|z|²`.
    pub fn z_norm_sq(&self) -> f64 {
        self.coords[..2 * self.n()].iter().map(|c| c * c).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(|&c| c == 0.0)
    }

    /// Group product; panics if dimensions differ (see [`multiply`]).
    pub fn mul(&self, other: &GroupElement) -> GroupElement {
        let n = self.n();
        assert_eq!(n, other.n(), "dimension mismatch in group product");
        let mut coords = self.coords.clone();
        let mut twist = 0.0;
        for j in 0..n {
            let (x, y) = (self.coords[j], self.coords[n + j]);
            let (xp, yp) = (other.coords[j], other.coords[n + j]);
            coords[j] += xp;
            coords[n + j] += yp;
            twist += y * xp - x * yp;
        }
        coords[2 * n] += other.coords[2 * n] + 2.0 * twist;
        GroupElement { coords }
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    /// `δ_a(z, t) = (az, a²t)`; `a` is assumed positive.
    pub fn dilate(&self, a: f64) -> GroupElement {
        let n = self.n();
        let mut coords = self.coords.clone();
        for c in coords[..2 * n].iter_mut() {
            *c *= a;
        }
        coords[2 * n] *= a * a;
        GroupElement { coords }
    }

    /// Korányi norm `(|z|⁴ + t²)^{1/4}`.
    pub fn norm(&self) -> f64 {
        let z2 = self.z_norm_sq();
        let t = self.t();
        (z2 * z2 + t * t).sqrt().sqrt()
    }

    /// `|u^{-1} v|` without the dimension check.
    pub fn dist(&self, other: &GroupElement) -> f64 {
        self.inverse().mul(other).norm()
    }
}

fn check_dims(u: &GroupElement, v: &GroupElement) -> Result<()> {
    if u.n() != v.n() {
        return Err(Error::DimensionMismatch {
            expected: u.n(),
            found: v.n(),
        });
    }
    Ok(())
}

pub fn multiply(u: &GroupElement, v: &GroupElement) -> Result<GroupElement> {
    check_dims(u, v)?;
    Ok(u.mul(v))
}

pub fn inverse(u: &GroupElement) -> GroupElement {
    u.inverse()
}

pub fn dilate(a: f64, u: &GroupElement) -> Result<GroupElement> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("dilation factor must be positive, got {a}")));
    }
    Ok(u.dilate(a))
}

pub fn norm(u: &GroupElement) -> f64 {
    u.norm()
}

/// `d(u, v) = |u^{-1} v|`.
pub fn distance(u: &GroupElement, v: &GroupElement) -> Result<f64> {
    check_dims(u, v)?;
    Ok(u.dist(v))
}

/// Lebesgue measure of the Korányi unit ball `{|z|⁴ + t² < 1}`:
/// `π^n Γ(n/2) Γ(3/2) / (Γ(n) Γ((n+3)/2))`.
pub fn unit_ball_volume(params: GroupParams) -> f64 {
    let n = params.n() as f64;
    PI.powf(n) * gamma(n / 2.0) * gamma(1.5) / (gamma(n) * gamma((n + 3.0) / 2.0))
}

/// The constant `2π^n Γ(n/2) Γ(1/2) / ((n+1) Γ(n) Γ((n+1)/2))` as it appears in
/// the literature; it is exactly twice [`unit_ball_volume`] for every `n`.
pub fn printed_unit_ball_volume(params: GroupParams) -> f64 {
    let n = params.n() as f64;
    2.0 * PI.powf(n + 0.5) * gamma(n / 2.0) / ((n + 1.0) * gamma(n) * gamma((n + 1.0) / 2.0))
}

/// Surface measure of the Euclidean unit sphere `S^{2n-1} ⊂ C^n`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powi(n as i32) / gamma(n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: GroupElement,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: GroupElement, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("ball radius must be positive and finite, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn unit(n: usize) -> Self {
        Self {
            center: GroupElement::identity(n),
            radius: 1.0,
        }
    }

    pub fn volume(&self) -> f64 {
        ball_volume(self)
    }

    pub fn contains(&self, u: &GroupElement) -> bool {
        self.center.dist(u) < self.radius
    }

    /// The ball with the same center and radius scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Ball {
        Ball {
            center: self.center.clone(),
            radius: self.radius * factor,
        }
    }
}

/// `|B(u, r)| = r^Q |B(0, 1)|`.
pub fn ball_volume(b: &Ball) -> f64 {
    let params = GroupParams { n: b.center.n() };
    b.radius.powi(params.q() as i32) * unit_ball_volume(params)
}

/// Default finite-difference step `1e-4 (1 + |u|)`.
pub fn default_fd_step(u: &GroupElement) -> f64 {
    1e-4 * (1.0 + u.norm())
}

/// Central differences of `X_j = ∂x_j + 2y_j ∂t` and `Y_j = ∂y_j − 2x_j ∂t`,
/// returned as `(X_1 f, .., X_n f, Y_1 f, .., Y_n f)`.
///
/// The fields are left-invariant, so `X_j f(u)` is the derivative of
/// `ε ↦ f(u·exp(ε e_{x_j}))`; the difference quotient is taken along that
/// curve, which reproduces the coordinate formula exactly.
pub fn horizontal_gradient<F: ScalarField + ?Sized>(f: &F, u: &GroupElement, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let n = u.n();
    let mut grad = vec![0.0; 2 * n];
    let mut step = GroupElement::identity(n);
    for (k, g) in grad.iter_mut().enumerate() {
        step.coords[k] = h;
        let fp = f.eval(&u.mul(&step));
        step.coords[k] = -h;
        let fm = f.eval(&u.mul(&step));
        step.coords[k] = 0.0;
        *g = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_of_unit_vectors() {
        let u = GroupElement::h1(1.0, 0.0, 0.0);
        let v = GroupElement::h1(0.0, 1.0, 0.0);
        let w = u.mul(&v);
        assert_eq!(w.coords(), &[1.0, 1.0, -2.0]);
    }

    #[test]
    fn inverse_flips_signs() {
        let u = GroupElement::h1(1.0, 2.0, 3.0);
        assert_eq!(u.inverse().coords(), &[-1.0, -2.0, -3.0]);
        assert!(u.mul(&u.inverse()).is_identity());
    }

    #[test]
    fn dilation_and_norm() {
        let u = GroupElement::h1(1.0, 0.0, 1.0);
        assert_eq!(u.dilate(2.0).coords(), &[2.0, 0.0, 4.0]);
        assert_relative_eq!(u.norm(), 2f64.powf(0.25), max_relative = 1e-15);
        assert_relative_eq!(GroupElement::h1(0.0, 0.0, 9.0).norm(), 3.0);
        assert_relative_eq!(GroupElement::h1(3.0, 4.0, 0.0).norm(), 5.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let u = GroupElement::identity(1);
        let v = GroupElement::identity(2);
        assert!(matches!(multiply(&u, &v), Err(Error::DimensionMismatch { .. })));
        assert!(distance(&u, &v).is_err());
        assert!(dilate(0.0, &u).is_err());
    }

    #[test]
    fn unit_ball_constants() {
        let p1 = GroupParams::new(1).unwrap();
        assert_relative_eq!(unit_ball_volume(p1), PI * PI / 2.0, max_relative = 1e-14);
        for n in 1..6 {
            let p = GroupParams::new(n).unwrap();
            assert_relative_eq!(printed_unit_ball_volume(p), 2.0 * unit_ball_volume(p), max_relative = 1e-13);
        }
    }

    #[test]
    fn ball_volume_scales_with_q() {
        let b = Ball::new(GroupElement::h1(0.3, -1.0, 2.0), 1.0).unwrap();
        assert_relative_eq!(b.scaled(2.0).volume(), 16.0 * b.volume(), max_relative = 1e-15);
        assert!(Ball::new(GroupElement::identity(1), 0.0).is_err());
    }
}
