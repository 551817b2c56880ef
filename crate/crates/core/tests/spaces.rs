use std::f64::consts::PI;

use heisenberg_core::potential::RhoField;
use heisenberg_core::spaces::{
    ball_family, ball_stats, bmo_norm, feature_balls, hoelder_norm, lebesgue_norm, morrey_norm, norm_from_stats, rho_at_centers, weak_lebesgue_norm,
    weak_lebesgue_norm_sampled, weak_morrey_norm, BallFamilySpec, SpaceSpec,
};
use heisenberg_core::{Ball, GroupElement, Potential, QuadratureSpec, TestFunction};
use proptest::prelude::*;

const UNIT: f64 = PI * PI / 2.0;

fn o() -> GroupElement {
    GroupElement::identity(1)
}

fn balls_for(f: &TestFunction, count: usize) -> Vec<Ball> {
    let spec = BallFamilySpec {
        count,
        anchors: vec![o()],
        ..Default::default()
    };
    let mut balls = feature_balls(f);
    balls.extend(ball_family(1, &spec, 11).unwrap());
    balls
}

fn big() -> Ball {
    Ball::new(o(), 8.0).unwrap()
}

#[test]
fn indicator_norms() {
    let b = Ball::new(GroupElement::h1(0.5, 0.5, 0.0), 1.5).unwrap();
    let f = TestFunction::indicator(b.clone());
    let quad = QuadratureSpec::default();
    let domain = Ball::new(b.center.clone(), 4.0).unwrap();
    assert!((lebesgue_norm(&TestFunction::indicator(Ball::unit(1)), 2.0, &big(), &quad).unwrap() - UNIT.sqrt()).abs() < 1e-8);
    for p in [1.0, 2.0, 3.5] {
        let exact = b.volume().powf(1.0 / p);
        assert!((weak_lebesgue_norm(&f, p, &domain, &quad).unwrap() / exact - 1.0).abs() < 1e-8);
        assert!((weak_lebesgue_norm_sampled(&f, p, &domain, &quad).unwrap() / exact - 1.0).abs() < 2e-2);
    }
}

#[test]
fn bump_integral_is_resolution_stable() {
    // ∫ exp(−|u|²) = |B₁| Q Γ(Q/2) / 2 = 2|B₁| for Q = 4.
    let f = TestFunction::bump(o(), 1.0).unwrap();
    let coarse = lebesgue_norm(&f, 1.0, &big(), &QuadratureSpec::grid(24)).unwrap();
    let fine = lebesgue_norm(&f, 1.0, &big(), &QuadratureSpec::grid(48)).unwrap();
    assert!((coarse / fine - 1.0).abs() < 1e-2, "{coarse} {fine}");
    assert!((fine / (2.0 * UNIT) - 1.0).abs() < 1e-3, "{fine}");
}

#[test]
fn weak_lebesgue_is_below_lebesgue() {
    let f = TestFunction::bump(GroupElement::h1(0.2, -0.3, 0.4), 0.8).unwrap();
    let quad = QuadratureSpec::default();
    for p in [1.0, 2.0, 4.0] {
        let weak = weak_lebesgue_norm(&f, p, &big(), &quad).unwrap();
        let strong = lebesgue_norm(&f, p, &big(), &quad).unwrap();
        assert!(weak <= strong * (1.0 + 1e-9), "p={p}: {weak} > {strong}");
    }
}

#[test]
fn critical_power_has_a_flat_weak_profile() {
    for p in [1.0, 2.0, 3.0] {
        let f = TestFunction::power(o(), 4.0 / p, None, None).unwrap();
        for r in [0.5, 2.0, 20.0] {
            let v = weak_lebesgue_norm(&f, p, &Ball::new(o(), r).unwrap(), &QuadratureSpec::default()).unwrap();
            assert!((v / UNIT.powf(1.0 / p) - 1.0).abs() < 1e-6, "p={p} r={r}: {v}");
        }
    }
}

#[test]
fn morrey_norm_is_homogeneous() {
    let f = TestFunction::bump(GroupElement::h1(1.0, 0.0, 0.5), 0.7).unwrap();
    let balls = balls_for(&f, 32);
    let spec = SpaceSpec::morrey(2.0, 0.5, 0.0);
    let quad = QuadratureSpec::default();
    let base = morrey_norm(&f, &spec, &RhoField::free(), &balls, &quad).unwrap().value;
    for lambda in [-3.0, 0.25] {
        let g = f.clone().scaled(lambda);
        let v = morrey_norm(&g, &spec, &RhoField::free(), &balls, &quad).unwrap().value;
        assert!((v / (lambda.abs() * base) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn critical_morrey_power_is_stabilized() {
    let (p, kappa) = (2.0, 0.5);
    let f = TestFunction::power(o(), 4.0 * (1.0 - kappa) / p, None, None).unwrap();
    let r = morrey_norm(
        &f,
        &SpaceSpec::morrey(p, kappa, 0.0),
        &RhoField::free(),
        &balls_for(&f, 64),
        &QuadratureSpec::default(),
    )
    .unwrap();
    assert!(r.stabilized, "{r:?}");
    // Centered balls give (|B₁|^{1−κ}/κ)^{1/p}.
    let centered = (UNIT.powf(1.0 - kappa) / kappa).powf(1.0 / p);
    assert!(
        r.value >= centered * (1.0 - 1e-3) && r.value <= 1.05 * centered,
        "{} vs {centered}",
        r.value
    );
}

#[test]
fn weak_morrey_is_below_morrey() {
    let quad = QuadratureSpec::default();
    for f in [
        TestFunction::bump(GroupElement::h1(0.5, 0.0, 0.0), 1.0).unwrap(),
        TestFunction::power(o(), 1.5, None, Some(2.0)).unwrap(),
    ] {
        let balls = balls_for(&f, 32);
        for (p, kappa) in [(1.0, 0.25), (2.0, 0.5)] {
            let weak = weak_morrey_norm(&f, &SpaceSpec::weak_morrey(p, kappa, 0.0), &RhoField::free(), &balls, &quad).unwrap();
            let strong = morrey_norm(&f, &SpaceSpec::morrey(p, kappa, 0.0), &RhoField::free(), &balls, &quad).unwrap();
            assert!(
                weak.value <= strong.value * (1.0 + 1e-6),
                "{f:?} p={p}: {} > {}",
                weak.value,
                strong.value
            );
        }
    }
}

#[test]
fn bmo_seminorms() {
    let quad = QuadratureSpec::default();
    let c = TestFunction::Constant { value: 4.0 };
    assert_eq!(bmo_norm(&c, 0.0, &RhoField::free(), &balls_for(&c, 16), &quad).unwrap().value, 0.0);

    let log = TestFunction::LogNorm { center: o() };
    let r = bmo_norm(&log, 0.0, &RhoField::free(), &balls_for(&log, 64), &quad).unwrap();
    assert!(r.stabilized && r.value > 0.0, "{r:?}");

    let ind = TestFunction::indicator(Ball::unit(1));
    let r = bmo_norm(&ind, 0.0, &RhoField::free(), &balls_for(&ind, 64), &quad).unwrap();
    // Exact bound 1/2; off-center balls cut the jump and carry quadrature error.
    assert!(r.value > 0.0 && r.value <= 0.5 * 1.01, "{r:?}");
}

#[test]
fn square_root_of_the_norm_is_hoelder() {
    let f = TestFunction::power(o(), -0.5, None, None).unwrap();
    let r = hoelder_norm(&f, 0.5, 0.0, &RhoField::free(), &balls_for(&f, 64), &QuadratureSpec::default()).unwrap();
    assert!(r.stabilized && r.value > 0.0, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn damping_makes_norms_decrease_in_theta(t1 in 0.0f64..4.0, dt in 0.0f64..4.0, c in 0.1f64..10.0) {
        let f = TestFunction::bump(GroupElement::h1(0.3, 0.1, 0.0), 1.0).unwrap();
        let balls = balls_for(&f, 16);
        let stats = ball_stats(&f, 2.0, &balls, &QuadratureSpec::default()).unwrap();
        let rho = rho_at_centers(&RhoField::new(Potential::Constant { c }, 1, 1e-8).unwrap(), &balls).unwrap();
        let lo = norm_from_stats(&SpaceSpec::morrey(2.0, 0.5, t1), &stats, &balls, &rho).unwrap();
        let hi = norm_from_stats(&SpaceSpec::morrey(2.0, 0.5, t1 + dt), &stats, &balls, &rho).unwrap();
        prop_assert!(hi.value <= lo.value * (1.0 + 1e-12));
    }
}
