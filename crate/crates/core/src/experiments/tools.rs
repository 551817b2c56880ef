//! Table subcommands: heat-kernel values, critical radii and single-function norms.

use super::config::ExperimentConfig;
use super::report::{format_point, Record};
use crate::error::Result;
use crate::functions::TestFunction;
use crate::group::{printed_unit_ball_volume, unit_ball_volume, Ball, GroupParams};
use crate::kernels::heat::{heat_kernel, heat_kernel_origin_h1, HeatConvention, HeatQuadrature};
use crate::potential::{rho_closed_form, RhoField};
use crate::spaces::{ball_family, feature_balls, lebesgue_norm, space_norm, weak_lebesgue_norm, NormTarget, SpaceKind, SpaceSpec};

fn rel_err(value: f64, exact: f64) -> f64 {
    if exact == value {
        0.0
    } else {
        (value - exact).abs() / exact.abs()
    }
}

/// `H_s(u)` under both conventions at the configured times and points, with
/// the origin closed form where available, plus the unit-ball volume rows.
pub fn heat_kernel_table(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let exp = "heat-kernel";
    let mut out = Vec::new();
    for (name, conv) in [("group-law", HeatConvention::GroupLaw), ("printed", HeatConvention::Printed)] {
        let hq = HeatQuadrature {
            convention: conv,
            ..HeatQuadrature::default()
        };
        for &s in &cfg.heat_kernel.times {
            for u in &cfg.heat_kernel.points {
                let value = heat_kernel(s, u, &hq)?;
                let mut rec = Record::new(exp, "kernel", name, &format_point(u));
                rec.param = Some(s);
                rec.value = Some(value);
                if u.is_identity() && u.n() == 1 {
                    let exact = heat_kernel_origin_h1(s, conv);
                    rec.output = Some(exact);
                    rec.ratio = Some(rel_err(value, exact));
                }
                out.push(rec);
            }
        }
    }
    let params = GroupParams::new(cfg.n)?;
    let (vol, printed) = (unit_ball_volume(params), printed_unit_ball_volume(params));
    let mut rec = Record::new(exp, "volume", "group-law", "unit-ball");
    rec.value = Some(vol);
    out.push(rec);
    let mut rec = Record::new(exp, "volume", "printed", "unit-ball");
    rec.value = Some(printed);
    rec.ratio = Some(printed / vol);
    out.push(rec);
    Ok(out)
}

/// `ρ(u)` at the configured points, with the closed form where it exists.
pub fn rho_table(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let v = cfg.potential;
    let field = if v.is_zero() {
        RhoField::free()
    } else {
        RhoField::new(v, cfg.n, cfg.rho.tol)?
    };
    cfg.rho
        .points
        .iter()
        .map(|u| {
            let value = field.rho(u)?;
            let mut rec = Record::new("rho", "rho", "", &format_point(u));
            rec.value = Some(value);
            if let Some(exact) = rho_closed_form(&v, u) {
                rec.output = Some(exact);
                rec.ratio = Some(rel_err(value, exact));
            }
            Ok(rec)
        })
        .collect()
}

fn kind_name(kind: SpaceKind) -> &'static str {
    match kind {
        SpaceKind::Lebesgue => "lebesgue",
        SpaceKind::WeakLebesgue => "weak-lebesgue",
        SpaceKind::Morrey => "morrey",
        SpaceKind::WeakMorrey => "weak-morrey",
        SpaceKind::Bmo => "bmo",
        SpaceKind::Hoelder => "hoelder",
    }
}

fn space_label(s: &SpaceSpec) -> String {
    match s.kind {
        SpaceKind::Lebesgue | SpaceKind::WeakLebesgue => format!("p={}", s.p),
        SpaceKind::Morrey | SpaceKind::WeakMorrey => format!("p={};kappa={};theta={}", s.p, s.kappa, s.theta),
        SpaceKind::Bmo => format!("theta={}", s.theta),
        SpaceKind::Hoelder => format!("beta={};theta={}", s.beta, s.theta),
    }
}

/// Norms of one test function in each configured space.
pub fn norm_table(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let f: &TestFunction = &cfg.norm.function;
    let mut bspec = cfg.balls.clone();
    if bspec.anchors.is_empty() {
        if let Some(c) = f.radial_center() {
            bspec.anchors = vec![c.clone()];
        }
    }
    let mut balls: Vec<Ball> = feature_balls(f);
    balls.extend(ball_family(cfg.n, &bspec, cfg.seed)?);
    let domain = &cfg.norm.domain;
    cfg.norm
        .spaces
        .iter()
        .map(|spec| {
            let mut rec = Record::new("norm", "norm", kind_name(spec.kind), &space_label(spec));
            rec.param = Some(spec.p);
            match spec.kind {
                SpaceKind::Lebesgue => rec.value = Some(lebesgue_norm(f, spec.p, domain, &cfg.quadrature)?),
                SpaceKind::WeakLebesgue => rec.value = Some(weak_lebesgue_norm(f, spec.p, domain, &cfg.quadrature)?),
                _ => {
                    let rho = spec.rho_field(cfg.n)?;
                    let r = space_norm(f as &dyn NormTarget, spec, &rho, &balls, &cfg.quadrature)?;
                    rec = rec.with_norm(&r);
                    rec.passed = Some(r.stabilized);
                }
            }
            Ok(rec)
        })
        .collect()
}
