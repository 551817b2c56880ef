use std::f64::consts::PI;

use heisenberg_core::potential::{
    check_dyadic_comparability, critical_function, default_rho_rule, fit_rho_comparability, random_pairs, rh_constant_estimate, RhoField,
};
use heisenberg_core::sampling::{random_point_in_box, rng_for};
use heisenberg_core::{GroupElement, Potential, QuadratureSpec};

const HP: Potential = Potential::HomogeneousPower { a: 2.0, scale: 1.0 };

#[test]
fn constant_reverse_hoelder_constant_is_one() {
    let est = rh_constant_estimate(&Potential::Constant { c: 2.5 }, 2.0, &QuadratureSpec::default(), 16).unwrap();
    assert!((est.constant - 1.0).abs() < 1e-10, "{}", est.constant);
    assert_eq!(est.balls_tested, 16);
}

#[test]
fn zero_power_is_a_constant() {
    let spec = QuadratureSpec::default();
    let a = rh_constant_estimate(&Potential::HomogeneousPower { a: 0.0, scale: 3.0 }, 2.0, &spec, 8).unwrap();
    let b = rh_constant_estimate(&Potential::Constant { c: 3.0 }, 2.0, &spec, 8).unwrap();
    assert!((a.constant - b.constant).abs() < 1e-10);
}

#[test]
fn power_reverse_hoelder_constant_is_stable() {
    let spec = QuadratureSpec::default();
    let a = rh_constant_estimate(&HP, 2.0, &spec, 64).unwrap().constant;
    let b = rh_constant_estimate(&HP, 2.0, &spec, 128).unwrap().constant;
    assert!(a.is_finite() && a >= 1.0);
    assert!((b - a).abs() / a <= 0.1, "{a} vs {b}");
}

#[test]
fn critical_function_increases() {
    let rule = default_rho_rule(1).unwrap();
    let u = GroupElement::h1(0.5, -1.0, 2.0);
    for v in [Potential::Constant { c: 0.3 }, HP] {
        let values: Vec<f64> = (0..40).map(|k| critical_function(&v, &u, 1e-3 * 1.4f64.powi(k), &rule)).collect();
        assert!(values.windows(2).all(|w| w[0] < w[1]), "{v:?}");
    }
}

#[test]
fn constant_rho_is_the_same_everywhere() {
    let field = RhoField::new(Potential::Constant { c: 2.0 }, 1, 1e-9).unwrap();
    let exact = (2.0 * PI * PI / 2.0).powf(-0.5);
    let mut rng = rng_for(9, 1);
    for _ in 0..10 {
        let r = field.rho(&random_point_in_box(&mut rng, 1, 10.0)).unwrap();
        assert!((r / exact - 1.0).abs() < 1e-8);
    }
}

#[test]
fn power_rho_at_origin_scales_with_the_coefficient() {
    let o = GroupElement::identity(1);
    let base = RhoField::new(HP, 1, 1e-8).unwrap().rho(&o).unwrap();
    for k in [0.1, 3.0, 40.0] {
        let v = Potential::HomogeneousPower { a: 2.0, scale: k };
        let r = RhoField::new(v, 1, 1e-8).unwrap().rho(&o).unwrap();
        assert!((r / (base * k.powf(-0.25)) - 1.0).abs() < 1e-2, "{k}: {r}");
    }
}

#[test]
fn constant_comparability_needs_nothing() {
    let pairs = random_pairs(1, 20, 1, 5.0, 1e-2, 10.0);
    let fit = fit_rho_comparability(&Potential::Constant { c: 1.0 }, &pairs).unwrap();
    assert_eq!(fit.c0, 1.0);
    let r = check_dyadic_comparability(
        &Potential::Constant { c: 1.0 },
        1.0,
        fit.n0,
        &GroupElement::h1(1.0, 2.0, 3.0),
        0.5,
        4,
        50,
        2,
    )
    .unwrap();
    assert_eq!(r.violations, 0);
}

#[test]
fn power_comparability_fit_validates_and_is_stable() {
    let pairs = random_pairs(1, 200, 4, 5.0, 1e-2, 10.0);
    let fit = fit_rho_comparability(&HP, &pairs).unwrap();
    let doubled = fit_rho_comparability(&HP, &random_pairs(1, 400, 4, 5.0, 1e-2, 10.0)).unwrap();
    assert!(fit.c0 >= 1.0 && fit.n0 > 0.0);
    assert!(doubled.c0 <= 1.25 * fit.c0 && doubled.n0 <= 1.5 * fit.n0, "{fit:?} {doubled:?}");
    let field = RhoField::new(HP, 1, 1e-6).unwrap();
    for (u, v) in random_pairs(1, 200, 99, 5.0, 1e-2, 10.0) {
        let (ru, rv) = (field.rho(&u).unwrap(), field.rho(&v).unwrap());
        assert!(doubled.holds(ru, rv, u.dist(&v), 1e-9), "{u:?} {v:?}");
    }
}

#[test]
fn zero_potential_has_no_critical_radius() {
    assert!(RhoField::new(Potential::Zero, 1, 1e-6)
        .unwrap()
        .rho(&GroupElement::identity(1))
        .unwrap()
        .is_infinite());
    assert!(RhoField::free().rho(&GroupElement::h1(1.0, 0.0, 0.0)).unwrap().is_infinite());
    assert!(fit_rho_comparability(&Potential::Zero, &random_pairs(1, 20, 1, 1.0, 0.1, 1.0)).is_err());
}
