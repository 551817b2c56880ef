//! Closed-form test functions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::group::{Ball, GroupElement};

/// Anything that can be evaluated pointwise on `H^n`.
pub trait ScalarField: Sync {
    fn eval(&self, u: &GroupElement) -> f64;
}

impl<F: Fn(&GroupElement) -> f64 + Sync> ScalarField for F {
    fn eval(&self, u: &GroupElement) -> f64 {
        self(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// The raw coordinate with the given index in the `[x, y, t]` layout.
    Coordinate {
        index: usize,
    },
    /// `exp(−(d(center, u)/width)²)`.
    Bump {
        center: GroupElement,
        width: f64,
    },
    /// `min(d(center, u)^{−γ}, cutoff)` on `d(center, u) ≤ radius`, zero outside.
    /// Missing `cutoff` / `radius` mean no cap / no support restriction.
    Power {
        center: GroupElement,
        gamma: f64,
        #[serde(default)]
        cutoff: Option<f64>,
        #[serde(default)]
        radius: Option<f64>,
    },
    Indicator {
        ball: Ball,
    },
    /// `ln d(center, u)`.
    LogNorm {
        center: GroupElement,
    },
    Sum {
        terms: Vec<TestFunction>,
    },
    Scaled {
        factor: f64,
        inner: Box<TestFunction>,
    },
}

impl TestFunction {
    pub fn bump(center: GroupElement, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid("bump width must be positive"));
        }
        Ok(Self::Bump { center, width })
    }

    pub fn power(center: GroupElement, gamma: f64, cutoff: Option<f64>, radius: Option<f64>) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(invalid("power exponent must be finite"));
        }
        if cutoff.is_some_and(|c| !(c > 0.0)) || radius.is_some_and(|r| !(r > 0.0)) {
            return Err(invalid("power cutoff and radius must be positive"));
        }
        Ok(Self::Power {
            center,
            gamma,
            cutoff,
            radius,
        })
    }

    pub fn indicator(ball: Ball) -> Self {
        Self::Indicator { ball }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self::Scaled {
            factor,
            inner: Box::new(self),
        }
    }

    pub fn evaluate(&self, u: &GroupElement) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Coordinate { index } => u.coords().get(*index).copied().unwrap_or(0.0),
            Self::Sum { terms } => terms.iter().map(|f| f.evaluate(u)).sum(),
            Self::Scaled { factor, inner } => factor * inner.evaluate(u),
            _ => {
                let center = self.radial_center().expect("radial variant");
                self.profile(center.dist(u))
            }
        }
    }

    /// Center about which the function depends only on the Korányi distance.
    pub fn radial_center(&self) -> Option<&GroupElement> {
        match self {
            Self::Bump { center, .. } | Self::Power { center, .. } | Self::LogNorm { center } => Some(center),
            Self::Indicator { ball } => Some(&ball.center),
            Self::Scaled { inner, .. } => inner.radial_center(),
            Self::Sum { terms } => {
                let first = terms.first()?.radial_center()?;
                terms.iter().all(|f| f.radial_center() == Some(first)).then_some(first)
            }
            Self::Constant { .. } | Self::Coordinate { .. } => None,
        }
    }

    /// Value as a function of the distance to [`radial_center`](Self::radial_center).
    /// Only meaningful for radial functions; constants return their value.
    pub fn profile(&self, rho: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Coordinate { .. } => f64::NAN,
            Self::Bump { width, .. } => (-(rho / width).powi(2)).exp(),
            Self::Power { gamma, cutoff, radius, .. } => {
                if radius.is_some_and(|r| rho > r) {
                    return 0.0;
                }
                let v = rho.powf(-gamma);
                match cutoff {
                    Some(c) => v.min(*c),
                    None => v,
                }
            }
            Self::Indicator { ball } => {
                if rho < ball.radius {
                    1.0
                } else {
                    0.0
                }
            }
            Self::LogNorm { .. } => rho.ln(),
            Self::Sum { terms } => terms.iter().map(|f| f.profile(rho)).sum(),
            Self::Scaled { factor, inner } => factor * inner.profile(rho),
        }
    }

    /// Characteristic length used to size grids and ball families.
    pub fn scale(&self) -> f64 {
        match self {
            Self::Bump { width, .. } => *width,
            Self::Power { radius, .. } => radius.unwrap_or(1.0),
            Self::Indicator { ball } => ball.radius,
            Self::Sum { terms } => terms.iter().map(|f| f.scale()).fold(0.0, f64::max),
            Self::Scaled { inner, .. } => inner.scale(),
            Self::Constant { .. } | Self::Coordinate { .. } | Self::LogNorm { .. } => 1.0,
        }
    }

    /// Radius (about the radial center) outside which the function vanishes or
    /// is below `1e-10` of its peak.
    pub fn effective_support(&self) -> Option<f64> {
        match self {
            Self::Bump { width, .. } => Some(5.0 * width),
            Self::Power { radius, .. } => *radius,
            Self::Indicator { ball } => Some(ball.radius),
            Self::Sum { terms } => terms
                .iter()
                .map(|f| f.effective_support())
                .try_fold(0.0, |acc, r| r.map(|r| f64::max(acc, r))),
            Self::Scaled { inner, .. } => inner.effective_support(),
            _ => None,
        }
    }

    /// Left translate `u ↦ f(g^{-1} u)` for radial functions (moves the center to `g·c`).
    pub fn translated(&self, g: &GroupElement) -> Option<TestFunction> {
        let mut out = self.clone();
        out.map_centers(&|c| g.mul(c))?;
        Some(out)
    }

    /// `u ↦ f(δ_{1/a} u)`: stretches the function by `a` about the identity.
    pub fn dilated(&self, a: f64) -> Option<TestFunction> {
        let mut out = self.clone();
        out.map_centers(&|c| c.dilate(a))?;
        out.scale_lengths(a);
        Some(out)
    }

    fn map_centers(&mut self, m: &dyn Fn(&GroupElement) -> GroupElement) -> Option<()> {
        match self {
            Self::Bump { center, .. } | Self::Power { center, .. } | Self::LogNorm { center } => *center = m(center),
            Self::Indicator { ball } => ball.center = m(&ball.center),
            Self::Scaled { inner, .. } => inner.map_centers(m)?,
            Self::Sum { terms } => terms.iter_mut().try_for_each(|f| f.map_centers(m))?,
            Self::Constant { .. } => {}
            Self::Coordinate { .. } => return None,
        }
        Some(())
    }

    fn scale_lengths(&mut self, a: f64) {
        match self {
            Self::Bump { width, .. } => *width *= a,
            Self::Power { gamma, cutoff, radius, .. } => {
                // min(ρ^{-γ}, c) ∘ δ_{1/a} = a^{γ} min(ρ^{-γ}, c a^{-γ})
                let g = *gamma;
                *radius = radius.map(|r| r * a);
                *cutoff = cutoff.map(|c| c * a.powf(-g));
                let inner = std::mem::replace(self, Self::Constant { value: 0.0 });
                *self = inner.scaled(a.powf(g));
            }
            Self::Indicator { ball } => ball.radius *= a,
            Self::LogNorm { center } => {
                let inner = Self::LogNorm { center: center.clone() };
                *self = Self::Sum {
                    terms: vec![inner, Self::Constant { value: -a.ln() }],
                };
            }
            Self::Scaled { inner, .. } => inner.scale_lengths(a),
            Self::Sum { terms } => terms.iter_mut().for_each(|f| f.scale_lengths(a)),
            Self::Constant { .. } | Self::Coordinate { .. } => {}
        }
    }
}

impl ScalarField for TestFunction {
    fn eval(&self, u: &GroupElement) -> f64 {
        self.evaluate(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_values() {
        let o = GroupElement::identity(1);
        let u = GroupElement::h1(1.0, 0.0, 0.0);
        let b = TestFunction::bump(o.clone(), 1.0).unwrap();
        assert!((b.evaluate(&u) - (-1.0f64).exp()).abs() < 1e-15);
        let p = TestFunction::power(o.clone(), 2.0, Some(4.0), Some(3.0)).unwrap();
        assert_eq!(p.evaluate(&o), 4.0);
        assert_eq!(p.evaluate(&GroupElement::h1(2.0, 0.0, 0.0)), 0.25);
        assert_eq!(p.evaluate(&GroupElement::h1(4.0, 0.0, 0.0)), 0.0);
        let ind = TestFunction::indicator(Ball::unit(1));
        assert_eq!(ind.evaluate(&GroupElement::h1(0.5, 0.0, 0.0)), 1.0);
        assert_eq!(ind.evaluate(&GroupElement::h1(0.0, 0.0, 1.0)), 0.0);
        let l = TestFunction::LogNorm { center: o };
        assert!((l.evaluate(&GroupElement::h1(0.0, 0.0, 4.0)) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn dilation_matches_definition() {
        let c = GroupElement::h1(0.3, -0.2, 0.5);
        let fs = vec![
            TestFunction::bump(c.clone(), 0.7).unwrap(),
            TestFunction::power(c.clone(), 1.5, Some(3.0), Some(2.0)).unwrap(),
            TestFunction::LogNorm { center: c.clone() },
        ];
        let u = GroupElement::h1(1.1, 0.4, -0.9);
        for f in fs {
            let g = f.dilated(2.5).unwrap();
            let expect = f.evaluate(&u.dilate(1.0 / 2.5));
            assert!((g.evaluate(&u) - expect).abs() < 1e-12, "{f:?}");
        }
    }

    #[test]
    fn translation_moves_center() {
        let f = TestFunction::bump(GroupElement::h1(0.2, 0.1, 0.0), 1.0).unwrap();
        let g = GroupElement::h1(1.0, -2.0, 0.5);
        let tf = f.translated(&g).unwrap();
        let u = GroupElement::h1(0.4, 0.9, 1.3);
        assert!((tf.evaluate(&u) - f.evaluate(&g.inverse().mul(&u))).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let f = TestFunction::Sum {
            terms: vec![
                TestFunction::bump(GroupElement::identity(1), 1.0).unwrap(),
                TestFunction::indicator(Ball::unit(1)).scaled(2.0),
            ],
        };
        let s = serde_json::to_string(&f).unwrap();
        let back: TestFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, back);
    }
}
