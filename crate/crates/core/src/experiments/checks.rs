//! Batch checks of the elementary inequalities behind the boundedness proofs.

use rand::Rng;

use super::config::{Experiment, ExperimentConfig};
use super::report::{CheckReport, CheckRow, Diagnostic};
use super::sweeps::test_family;
use crate::error::Result;
use crate::group::Ball;
use crate::potential::{check_dyadic_comparability_with, fit_rho_comparability, random_pairs, RhoField};
use crate::sampling::{log_uniform, random_point_at_norm, random_point_in_ball, random_point_in_box, rng_for};
use crate::spaces::{ball_family, ball_functional, ball_stats, rho_at_centers, SpaceSpec};

const SLACK: f64 = 1e-12;

struct Tally {
    row: CheckRow,
}

impl Tally {
    fn new(name: &str) -> Self {
        Self {
            row: CheckRow {
                name: name.into(),
                instances: 0,
                violations: 0,
                min_margin: f64::INFINITY,
            },
        }
    }

    /// Records `lhs ≤ rhs`.
    fn le(&mut self, lhs: f64, rhs: f64) {
        self.chain(&[lhs, rhs]);
    }

    /// Records `a₀ ≤ a₁ ≤ …` as one instance.
    fn chain(&mut self, terms: &[f64]) {
        self.row.instances += 1;
        let mut ok = true;
        for w in terms.windows(2) {
            if w[0] > 0.0 {
                self.row.min_margin = self.row.min_margin.min(w[1] / w[0]);
            }
            ok &= w[0] <= w[1] * (1.0 + SLACK);
        }
        if !ok {
            self.row.violations += 1;
        }
    }
}

/// `1 ≤ (1 + 2r/ρ)^θ ≤ 2^θ (1 + r/ρ)^θ` on random `(r, ρ, θ)`.
fn check_damping_doubling(cfg: &ExperimentConfig) -> CheckRow {
    let mut rng = rng_for(cfg.seed, 0x2a);
    let mut t = Tally::new("damping_doubling");
    for _ in 0..cfg.inequalities.samples {
        let r = log_uniform(&mut rng, 1e-3, 1e3);
        let rho = log_uniform(&mut rng, 1e-3, 1e3);
        let theta = rng.gen_range(0.0..10.0);
        let mid = (1.0 + 2.0 * r / rho).powf(theta);
        t.chain(&[1.0, mid, 2f64.powf(theta) * (1.0 + r / rho).powf(theta)]);
    }
    t.row
}

/// Fits `(C0, N0)` on random pairs, then checks the dyadic consequence on
/// random balls.
fn check_dyadic_comparability(cfg: &ExperimentConfig, report: &mut CheckReport) -> Result<()> {
    let v = cfg.potential;
    if v.is_zero() {
        return Ok(());
    }
    let n = cfg.n;
    let samples = cfg.inequalities.samples;
    let pairs = random_pairs(n, samples.max(10), cfg.seed, 5.0, 1e-2, 1e1);
    let fit = fit_rho_comparability(&v, &pairs)?;
    let field = RhoField::new(v, n, 1e-8)?;
    let (balls, k_max) = (10usize, 4u32);
    let trials = samples.div_ceil(balls * k_max as usize);
    let mut rng = rng_for(cfg.seed, 0xc02);
    let mut row = CheckRow {
        name: "rho_dyadic".into(),
        instances: 0,
        violations: 0,
        min_margin: f64::INFINITY,
    };
    for k in 0..balls {
        let u = random_point_in_box(&mut rng, n, 5.0);
        let r = log_uniform(&mut rng, 1e-2, 1e1);
        let c = check_dyadic_comparability_with(&field, fit.c0, fit.n0, &u, r, k_max, trials, cfg.seed.wrapping_add(k as u64))?;
        row.instances += c.checks;
        row.violations += c.violations;
        row.min_margin = row.min_margin.min(c.min_margin);
    }
    report.checks.push(row);
    for (label, value) in [("com_c0", fit.c0), ("com_n0", fit.n0)] {
        report.diagnostics.push(Diagnostic {
            label: label.into(),
            param: None,
            value,
            passed: None,
        });
    }
    Ok(())
}

/// `½|v⁻¹u₀| ≤ |v⁻¹u| ≤ (3/2)|v⁻¹u₀|` for `u ∈ B(u₀, r)` and `|v⁻¹u₀| ≥ 2r`.
fn check_annulus(cfg: &ExperimentConfig) -> Result<CheckRow> {
    let n = cfg.n;
    let mut rng = rng_for(cfg.seed, 0xa22);
    let mut t = Tally::new("annulus");
    for _ in 0..cfg.inequalities.annulus_samples {
        let u0 = random_point_in_box(&mut rng, n, 5.0);
        let r = log_uniform(&mut rng, 1e-2, 1e2);
        let u = random_point_in_ball(&mut rng, &Ball::new(u0.clone(), r)?);
        let far = log_uniform(&mut rng, 2.0 * r, 100.0 * r);
        let v = u0.mul(&random_point_at_norm(&mut rng, n, far));
        let (d0, d) = (v.dist(&u0), v.dist(&u));
        t.chain(&[0.5 * d0, d, 1.5 * d0]);
    }
    Ok(t.row)
}

/// Per-ball weak ≤ strong and `θ`-monotonicity of the Morrey functional on
/// the test family.
fn check_ball_inequalities(cfg: &ExperimentConfig, report: &mut CheckReport) -> Result<()> {
    let samples = cfg.inequalities.samples;
    let mut bspec = cfg.balls.clone();
    let count = samples.div_ceil(bspec.total()).max(1);
    let family = test_family(cfg, count)?;
    if bspec.anchors.is_empty() {
        let mut anchors = Vec::new();
        for c in family.iter().filter_map(|f| f.f.radial_center()) {
            if !anchors.contains(c) {
                anchors.push(c.clone());
            }
        }
        bspec.anchors = anchors;
    }
    let balls = ball_family(cfg.n, &bspec, cfg.seed)?;
    let rho_field = if cfg.potential.is_zero() {
        RhoField::free()
    } else {
        RhoField::new(cfg.potential, cfg.n, 1e-8)?
    };
    let rho = rho_at_centers(&rho_field, &balls)?;
    let thetas = [0.0, 0.5, 1.0, 2.0, 4.0];
    let mut weak = Tally::new("weak_le_strong");
    let mut mono = Tally::new("theta_monotone");
    for nf in &family {
        let stats = ball_stats(&nf.f, cfg.p, &balls, &cfg.quadrature)?;
        for ((stat, ball), &rho_u) in stats.iter().zip(&balls).zip(&rho) {
            weak.le(stat.weak, stat.power_integral.powf(1.0 / cfg.p));
            let values: Vec<f64> = thetas
                .iter()
                .map(|&th| ball_functional(&SpaceSpec::morrey(cfg.p, cfg.kappa, th), stat, ball, rho_u))
                .collect::<Result<_>>()?;
            for w in values.windows(2) {
                mono.le(w[1], w[0]);
            }
        }
    }
    report.checks.push(weak.row);
    report.checks.push(mono.row);
    Ok(())
}

/// Runs every check; all are expected to be violation-free.
pub fn run_inequality_suite(cfg: &ExperimentConfig) -> Result<CheckReport> {
    cfg.validate(Experiment::Inequalities)?;
    let mut report = CheckReport {
        experiment: Experiment::Inequalities.name().into(),
        ..Default::default()
    };
    report.checks.push(check_damping_doubling(cfg));
    check_dyadic_comparability(cfg, &mut report)?;
    report.checks.push(check_annulus(cfg)?);
    check_ball_inequalities(cfg, &mut report)?;
    Ok(report)
}
