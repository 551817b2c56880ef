use std::f64::consts::PI;

use heisenberg_core::group::{ball_volume, horizontal_gradient};
use heisenberg_core::sampling::{random_point_in_ball, rng_for, sample_ball, UnitBallRule};
use heisenberg_core::{Ball, GroupElement, GroupParams, QuadratureSpec, TestFunction};
use proptest::prelude::*;

fn point(n: usize) -> impl Strategy<Value = GroupElement> {
    prop::collection::vec(-5.0f64..5.0, 2 * n + 1).prop_map(|c| GroupElement::from_coords(&c).unwrap())
}

fn close(a: &GroupElement, b: &GroupElement, tol: f64) -> bool {
    a.coords().iter().zip(b.coords()).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #[test]
    fn multiplication_is_associative(u in point(2), v in point(2), w in point(2)) {
        prop_assert!(close(&u.mul(&v).mul(&w), &u.mul(&v.mul(&w)), 1e-12 * (1.0 + u.norm() * v.norm() * w.norm()).powi(2)));
    }

    #[test]
    fn identity_and_inverse_laws(u in point(1)) {
        let e = GroupElement::identity(1);
        prop_assert_eq!(u.mul(&e), u.clone());
        prop_assert!(close(&u.mul(&u.inverse()), &e, 1e-12));
        prop_assert!(close(&u.inverse().mul(&u), &e, 1e-12));
    }

    #[test]
    fn norm_is_homogeneous(u in point(1), a in 1e-3f64..1e3) {
        let lhs = u.dilate(a).norm();
        prop_assert!((lhs - a * u.norm()).abs() <= 1e-12 * a * u.norm());
    }

    #[test]
    fn triangle_inequality(u in point(1), v in point(1), w in point(1)) {
        prop_assert!(u.dist(&w) <= u.dist(&v) + v.dist(&w) + 1e-12);
    }

    #[test]
    fn distance_is_left_invariant(g in point(1), u in point(1), v in point(1)) {
        let d = u.dist(&v);
        prop_assert!((g.mul(&u).dist(&g.mul(&v)) - d).abs() <= 1e-12 * (1.0 + d) * (1.0 + g.norm()).powi(2));
    }

    #[test]
    fn ball_volume_scales_with_homogeneous_dimension(u in point(1), r in 1e-2f64..1e2, lambda in 0.1f64..10.0) {
        let b = Ball::new(u.clone(), r).unwrap();
        let big = Ball::new(u, lambda * r).unwrap();
        prop_assert!((ball_volume(&big) / ball_volume(&b) - lambda.powi(4)).abs() <= 1e-12 * lambda.powi(4));
    }

    #[test]
    fn json_is_the_flat_coordinate_array(u in point(2)) {
        let text = serde_json::to_string(&u).unwrap();
        prop_assert!(text.starts_with('['));
        let back: GroupElement = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, u);
    }
}

#[test]
fn even_length_coordinates_are_rejected() {
    assert!(serde_json::from_str::<GroupElement>("[1.0, 2.0]").is_err());
}

#[test]
fn unit_ball_volume_and_doubling() {
    let unit = ball_volume(&Ball::unit(1));
    assert!((unit - PI * PI / 2.0).abs() < 1e-14);
    let twice = ball_volume(&Ball::new(GroupElement::identity(1), 2.0).unwrap());
    assert!((twice / unit - 16.0).abs() < 1e-12);
    let mut last = unit;
    for k in 1..10 {
        let v = ball_volume(&Ball::new(GroupElement::identity(1), 0.5f64.powi(k)).unwrap());
        assert!(v < last);
        last = v;
    }
}

#[test]
fn sampled_weights_sum_to_the_volume() {
    let b = Ball::new(GroupElement::h1(1.0, -2.0, 0.5), 0.7).unwrap();
    let nodes = sample_ball(&b, &QuadratureSpec::default()).unwrap();
    let total: f64 = nodes.iter().map(|(_, w)| w).sum();
    assert!((total / b.volume() - 1.0).abs() < 5e-3, "{total} vs {}", b.volume());
    assert!(nodes.iter().all(|(u, _)| b.contains(u)));
}

#[test]
fn centered_t_coordinate_integrates_to_zero() {
    let c = GroupElement::h1(0.4, 1.1, -0.3);
    let b = Ball::new(c.clone(), 1.3).unwrap();
    let rule = UnitBallRule::new(GroupParams::new(1).unwrap(), &QuadratureSpec::default()).unwrap();
    let v = rule.integrate(&b, |u| c.inverse().mul(u).t());
    assert!(v.abs() < 1e-10 * b.volume(), "{v}");
}

#[test]
fn second_moment_matches_monte_carlo() {
    // ∫_{B(0,1)} |w|² against a plain Monte Carlo average over the ball.
    let rule = UnitBallRule::new(GroupParams::new(1).unwrap(), &QuadratureSpec::grid(48)).unwrap();
    let unit = Ball::unit(1);
    let quad = rule.integrate(&unit, |w| w.norm().powi(2));
    let mut rng = rng_for(3, 0x2d);
    let samples = 200_000;
    let mc = (0..samples).map(|_| random_point_in_ball(&mut rng, &unit).norm().powi(2)).sum::<f64>() / samples as f64 * unit.volume();
    assert!((quad / mc - 1.0).abs() < 1e-2, "{quad} vs {mc}");
    // Closed form Q|B₁|/(Q+2).
    assert!((quad / (4.0 * unit.volume() / 6.0) - 1.0).abs() < 1e-3);
}

#[test]
fn gradient_of_coordinates() {
    let u = GroupElement::h1(0.7, -1.3, 0.2);
    let t = TestFunction::Coordinate { index: 2 };
    let g = horizontal_gradient(&t, &u, 1e-4).unwrap();
    assert!((g[0] - 2.0 * -1.3).abs() < 1e-8 && (g[1] + 2.0 * 0.7).abs() < 1e-8, "{g:?}");
    let x = TestFunction::Coordinate { index: 0 };
    let g = horizontal_gradient(&x, &u, 1e-4).unwrap();
    assert!((g[0] - 1.0).abs() < 1e-10 && g[1].abs() < 1e-10, "{g:?}");
    let c = TestFunction::Constant { value: 3.0 };
    assert_eq!(horizontal_gradient(&c, &u, 1e-4).unwrap(), vec![0.0, 0.0]);
    assert!(horizontal_gradient(&c, &u, 0.0).is_err());
}

#[test]
fn gradient_converges_at_second_order() {
    let f = TestFunction::bump(GroupElement::h1(0.2, 0.1, 0.0), 1.0).unwrap();
    let u = GroupElement::h1(0.5, 0.3, 0.4);
    let reference = horizontal_gradient(&f, &u, 1e-4).unwrap();
    let err = |h: f64| {
        let g = horizontal_gradient(&f, &u, h).unwrap();
        g.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    let order = (err(0.02) / err(0.01)).log2();
    assert!((order - 2.0).abs() < 0.3, "{order}");
}
