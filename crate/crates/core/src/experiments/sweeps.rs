//! Ratio sweeps for the boundedness experiments.

use once_cell::sync::Lazy;
use parking_lot::Mutex;
use std::collections::HashMap;
use std::sync::Arc;

use super::config::{hoelder_beta, lemma_beta, Experiment, ExperimentConfig};
use super::report::{Diagnostic, RatioReport, RatioRow, Summary};
use crate::error::{invalid, Result};
use crate::exec;
use crate::functions::TestFunction;
use crate::group::{Ball, GroupElement, GroupParams};
use crate::kernels::fractional::{FractionalField, PolarTable};
use crate::kernels::{SubordinationSpec, TrotterSpec};
use crate::potential::{Potential, RhoField};
use crate::sampling::{random_point_in_box, rng_for, QuadratureSpec};
use crate::spaces::{
    ball_family, ball_stats, feature_balls, lebesgue_norm, norm_from_stats, rho_at_centers, weak_lebesgue_norm_sampled, BallStat, GradientNorm,
    NormTarget, SpaceSpec,
};

type FieldKey = String;
static FIELDS: Lazy<Mutex<HashMap<FieldKey, Arc<FractionalField>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Peels constant factors: `f = factor · inner`.
fn strip_factor(f: &TestFunction) -> (f64, TestFunction) {
    match f {
        TestFunction::Scaled { factor, inner } => {
            let (k, g) = strip_factor(inner);
            (factor * k, g)
        }
        g => (1.0, g.clone()),
    }
}

/// `(c, a, factor, g)` with `f = factor · g(δ_{1/a}(c⁻¹·))` and `g` canonical
/// for the symmetries of `V`: centered at the identity when `V` is constant,
/// unit scale when `V = 0`.
fn canonical(v: &Potential, f: &TestFunction) -> (Option<GroupElement>, f64, f64, TestFunction) {
    let (mut factor, mut g) = strip_factor(f);
    let mut center = None;
    if v.is_translation_invariant() {
        if let Some(c) = g.radial_center().cloned() {
            if let Some(h) = g.translated(&c.inverse()) {
                g = h;
                center = Some(c);
            }
        }
    }
    let mut a = 1.0;
    if v.is_zero() && center.is_some() {
        let s = g.scale();
        if let Some(h) = g.dilated(1.0 / s) {
            let (k, h) = strip_factor(&h);
            // g(u) = h'(δ_{1/s}u) with h' = k·h
            factor *= k;
            g = h;
            a = s;
        }
    }
    (center, a, factor, g)
}

/// JSON text with every number rounded to 10 significant digits, so that
/// canonical forms reached through different rounding share a key.
fn quantized_key(v: &serde_json::Value) -> String {
    use serde_json::Value;
    match v {
        Value::Number(x) => format!("{:.9e}", x.as_f64().unwrap_or(f64::NAN)),
        Value::Array(xs) => format!("[{}]", xs.iter().map(quantized_key).collect::<Vec<_>>().join(",")),
        Value::Object(m) => format!(
            "{{{}}}",
            m.iter().map(|(k, x)| format!("{k}:{}", quantized_key(x))).collect::<Vec<_>>().join(",")
        ),
        other => other.to_string(),
    }
}

/// `I_α f` on the polar table. Builds are memoised on the canonical form of
/// `f`, so translates, dilates and multiples reuse one table.
pub fn fractional_field(v: &Potential, f: &TestFunction, sub: &SubordinationSpec, ts: &TrotterSpec) -> Result<Arc<FractionalField>> {
    let (center, a, factor, g) = canonical(v, f);
    let key = quantized_key(&serde_json::to_value((v, &g, sub, ts))?);
    let cached = FIELDS.lock().get(&key).cloned();
    let base = match cached {
        Some(field) => field,
        None => {
            let field = Arc::new(FractionalField::build(v, &g, sub, ts, PolarTable::default())?);
            FIELDS.lock().insert(key, field.clone());
            field
        }
    };
    match center {
        Some(c) => Ok(Arc::new(base.transformed(c, a, factor, sub.alpha))),
        None if factor != 1.0 => Ok(Arc::new(base.transformed(base.center().clone(), 1.0, factor, sub.alpha))),
        None => Ok(base),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedFunction {
    pub label: String,
    pub f: TestFunction,
}

impl NamedFunction {
    pub fn is_bump(&self) -> bool {
        matches!(self.f, TestFunction::Bump { .. })
    }
}

/// Family of `count` functions. Kinds cycle bump, power, bump, indicator.
/// The `j`-th function of a kind has scale index `j mod S` on the grid of `S`
/// scales and center `⌊j/S⌋` (cyclically). Functions past `cfg.functions.count`
/// (the doubled family) use the interleaved grid of midpoints instead, so the
/// family is prefix-stable. Non-invariant potentials put every center at the
/// identity.
pub fn test_family(cfg: &ExperimentConfig, count: usize) -> Result<Vec<NamedFunction>> {
    let n = cfg.n;
    let fs = &cfg.functions;
    if fs.scales == 0 || fs.centers == 0 || !(fs.scale_min > 0.0 && fs.scale_min <= fs.scale_max) {
        return Err(invalid("family needs scales ≥ 1, centers ≥ 1 and 0 < scale_min ≤ scale_max"));
    }
    let q_dim = GroupParams::new(n)?.q_f64();
    let mut rng = rng_for(cfg.seed, 0xfa17);
    let mut centers = vec![GroupElement::identity(n)];
    for _ in 1..fs.centers {
        centers.push(random_point_in_box(&mut rng, n, fs.center_half_width));
    }
    if !cfg.potential.is_translation_invariant() {
        centers.iter_mut().for_each(|c| *c = GroupElement::identity(n));
    }
    let s_count = fs.scales;
    let scale = |pos: usize, refined: bool| {
        let t = match (refined, s_count) {
            (false, 1) => 0.5,
            (false, _) => pos as f64 / (s_count - 1) as f64,
            (true, _) => (pos as f64 + 0.5) / s_count as f64,
        };
        fs.scale_min * (fs.scale_max / fs.scale_min).powf(t)
    };
    let gamma = q_dim / 4.0;
    let mut seen = [0usize; 4];
    (0..count)
        .map(|i| {
            let kind = match i % 4 {
                0 | 2 => 0,
                1 => 1,
                _ => 2,
            };
            let j = seen[kind];
            seen[kind] += 1;
            let s = scale(j % s_count, i >= fs.count);
            let center = centers[(j / s_count) % centers.len()].clone();
            let (label, f) = match kind {
                0 => ("bump", TestFunction::bump(center, s)?),
                1 => ("power", TestFunction::power(center, gamma, Some((0.1 * s).powf(-gamma)), Some(s))?),
                _ => ("indicator", TestFunction::indicator(Ball::new(center, s)?)),
            };
            Ok(NamedFunction {
                label: format!("{label}-{i}"),
                f,
            })
        })
        .collect()
}

/// Distinct centers of a family, in order of first appearance.
fn family_centers(family: &[NamedFunction]) -> Vec<GroupElement> {
    let mut out: Vec<GroupElement> = Vec::new();
    for nf in family {
        if let Some(c) = nf.f.radial_center() {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
    }
    out
}

/// Balls of one test function: its feature balls, then the shared family.
/// The base family is the first `base` entries.
struct FnBalls {
    balls: Vec<Ball>,
    rho: Vec<f64>,
    base: usize,
}

impl FnBalls {
    fn base(&self) -> (&[Ball], &[f64]) {
        (&self.balls[..self.base], &self.rho[..self.base])
    }
}

/// Base and doubled families with a ball family anchored at their centers.
struct Setup {
    family: Vec<NamedFunction>,
    n_base: usize,
    per: Vec<FnBalls>,
}

fn setup(cfg: &ExperimentConfig, rho_potential: &Potential) -> Result<Setup> {
    let n_base = cfg.functions.count;
    let family = test_family(cfg, 2 * n_base)?;
    let mut bspec = cfg.balls.doubled();
    if bspec.anchors.is_empty() {
        bspec.anchors = family_centers(&family);
    }
    let shared = ball_family(cfg.n, &bspec, cfg.seed)?;
    let m_base = bspec.total() - bspec.count + cfg.balls.count;
    let rho_field = if rho_potential.is_zero() {
        RhoField::free()
    } else {
        RhoField::new(*rho_potential, cfg.n, 1e-8)?
    };
    let rho_shared = rho_at_centers(&rho_field, &shared)?;
    let centers = family_centers(&family);
    let rho_centers = rho_field.rho_many(&centers)?;
    let per = family
        .iter()
        .map(|nf| {
            let mut balls = feature_balls(&nf.f);
            let k = balls.len();
            let rho_c =
                nf.f.radial_center()
                    .and_then(|c| centers.iter().position(|x| x == c))
                    .map_or(f64::INFINITY, |i| rho_centers[i]);
            let mut rho = vec![rho_c; k];
            balls.extend(shared.iter().cloned());
            rho.extend(rho_shared.iter().copied());
            FnBalls {
                balls,
                rho,
                base: k + m_base,
            }
        })
        .collect();
    Ok(Setup { family, n_base, per })
}

fn fields_for(cfg: &ExperimentConfig, family: &[NamedFunction]) -> Result<Vec<Arc<FractionalField>>> {
    let sub = cfg.subordination_spec();
    exec::map_slice(family, |nf| fractional_field(&cfg.potential, &nf.f, &sub, &cfg.trotter))
        .into_iter()
        .collect()
}

fn stats_for<T: NormTarget + ?Sized, P: std::ops::Deref<Target = T>>(
    targets: &[P],
    p: f64,
    per: &[&FnBalls],
    quad: &QuadratureSpec,
) -> Result<Vec<Vec<BallStat>>> {
    targets.iter().zip(per).map(|(t, fb)| ball_stats(&**t, p, &fb.balls, quad)).collect()
}

/// Inputs of one ratio series.
struct Series<'a> {
    name: String,
    param: f64,
    input: SpaceSpec,
    output: SpaceSpec,
    in_stats: &'a [Vec<BallStat>],
    out_stats: &'a [Vec<BallStat>],
    labels: Vec<&'a str>,
    per: Vec<&'a FnBalls>,
    n_base: usize,
}

fn run_series(s: Series<'_>, rows: &mut Vec<RatioRow>) -> Result<Summary> {
    let (mut max_base, mut max_full) = (0.0f64, 0.0f64);
    for (i, label) in s.labels.iter().enumerate() {
        let fb = s.per[i];
        let full_in = norm_from_stats(&s.input, &s.in_stats[i], &fb.balls, &fb.rho)?;
        let full_out = norm_from_stats(&s.output, &s.out_stats[i], &fb.balls, &fb.rho)?;
        max_full = max_full.max(full_out.value / full_in.value);
        if i < s.n_base {
            let (b, r) = fb.base();
            let inp = norm_from_stats(&s.input, &s.in_stats[i][..fb.base], b, r)?;
            let out = norm_from_stats(&s.output, &s.out_stats[i][..fb.base], b, r)?;
            let ratio = out.value / inp.value;
            max_base = max_base.max(ratio);
            rows.push(RatioRow {
                series: s.name.clone(),
                label: label.to_string(),
                param: s.param,
                input_norm: inp.value,
                output_norm: out.value,
                ratio,
                output: out,
            });
        }
    }
    Ok(Summary::new(&s.name, s.param, max_base, max_full))
}

fn labels(family: &[NamedFunction]) -> Vec<&str> {
    family.iter().map(|f| f.label.as_str()).collect()
}

/// Output-space sweep over `θ'`; the headline series is the smallest `θ'`
/// whose max ratio is stable within 10%.
fn theta_sweep(
    cfg: &ExperimentConfig,
    st: &Setup,
    input: SpaceSpec,
    output: impl Fn(f64) -> SpaceSpec,
    in_stats: &[Vec<BallStat>],
    out_stats: &[Vec<BallStat>],
    report: &mut RatioReport,
) -> Result<()> {
    let sweep = cfg.theta_sweep();
    let first = report.summaries.len();
    for &th in &sweep {
        let s = Series {
            name: format!("theta_out={th}"),
            param: th,
            input,
            output: output(th),
            in_stats,
            out_stats,
            labels: labels(&st.family),
            per: st.per.iter().collect(),
            n_base: st.n_base,
        };
        let summary = run_series(s, &mut report.rows)?;
        report.summaries.push(summary);
    }
    let chosen = (first..report.summaries.len()).find(|&i| report.summaries[i].stable(0.1));
    report.primary = chosen.unwrap_or(first);
    report.diagnostics.push(Diagnostic {
        label: "theta_out_selected".into(),
        param: None,
        value: chosen.map_or(f64::NAN, |i| report.summaries[i].param),
        passed: Some(chosen.is_some()),
    });
    Ok(())
}

/// Boundedness sweep for `L^{p,κ}_{ρ,θ} → L^{q,κq/p}_{ρ,θ'}` with `0 < κ < p/q`.
pub fn run_morrey_boundedness(cfg: &ExperimentConfig) -> Result<RatioReport> {
    let d = cfg.validate(Experiment::ThmMorrey)?;
    let (p, q) = (cfg.p, d.q);
    let st = setup(cfg, &cfg.potential)?;
    let fields = fields_for(cfg, &st.family)?;
    let fs: Vec<&TestFunction> = st.family.iter().map(|nf| &nf.f).collect();
    let per: Vec<&FnBalls> = st.per.iter().collect();
    let in_stats = stats_for(&fs, p, &per, &cfg.quadrature)?;
    let out_stats = stats_for(&fields, q, &per, &cfg.quadrature)?;
    let mut report = RatioReport {
        experiment: Experiment::ThmMorrey.name().into(),
        ..Default::default()
    };
    let rho_v = cfg.potential;
    let input = SpaceSpec::morrey(p, cfg.kappa, cfg.theta).with_rho(rho_v);
    let kappa = cfg.kappa;
    theta_sweep(
        cfg,
        &st,
        input,
        |th| SpaceSpec::morrey(q, kappa * q / p, th).with_rho(rho_v),
        &in_stats,
        &out_stats,
        &mut report,
    )?;

    // Boundary scan towards κ = p/q at the headline θ'.
    let th_out = report.primary().param;
    let mut scan = Vec::new();
    for &frac in &cfg.kappa_scan {
        let k = frac * p / q;
        let s = Series {
            name: format!("kappa={k}"),
            param: k,
            input: SpaceSpec::morrey(p, k, cfg.theta).with_rho(rho_v),
            output: SpaceSpec::morrey(q, k * q / p, th_out).with_rho(rho_v),
            in_stats: &in_stats,
            out_stats: &out_stats,
            labels: labels(&st.family),
            per: st.per.iter().collect(),
            n_base: st.n_base,
        };
        let mut sink = Vec::new();
        scan.push(run_series(s, &mut sink)?);
    }
    if let (Some(a), Some(b)) = (scan.first(), scan.last()) {
        report.diagnostics.push(Diagnostic {
            label: "kappa_boundary_growth".into(),
            param: Some(b.param),
            value: b.max_ratio / a.max_ratio,
            passed: None,
        });
    }
    report.summaries.extend(scan);
    Ok(report)
}

/// Boundedness sweep for `L^{1,κ}_{ρ,θ} → WL^{q,κq}_{ρ,θ'}` with `q = Q/(Q−α)`.
pub fn run_weak_morrey_boundedness(cfg: &ExperimentConfig) -> Result<RatioReport> {
    let d = cfg.validate(Experiment::ThmWeak)?;
    let q = d.q;
    let st = setup(cfg, &cfg.potential)?;
    let fields = fields_for(cfg, &st.family)?;
    let fs: Vec<&TestFunction> = st.family.iter().map(|nf| &nf.f).collect();
    let per: Vec<&FnBalls> = st.per.iter().collect();
    let in_stats = stats_for(&fs, 1.0, &per, &cfg.quadrature)?;
    let out_stats = stats_for(&fields, q, &per, &cfg.quadrature)?;
    let mut report = RatioReport {
        experiment: Experiment::ThmWeak.name().into(),
        ..Default::default()
    };
    let rho_v = cfg.potential;
    let kappa = cfg.kappa;
    let input = SpaceSpec::morrey(1.0, kappa, cfg.theta).with_rho(rho_v);
    theta_sweep(
        cfg,
        &st,
        input,
        |th| SpaceSpec::weak_morrey(q, kappa * q, th).with_rho(rho_v),
        &in_stats,
        &out_stats,
        &mut report,
    )?;

    // The weak output norm never exceeds the strong one.
    let th_out = report.primary().param;
    let mut violations = 0;
    for (stats, fb) in out_stats.iter().zip(&st.per) {
        let weak = norm_from_stats(&SpaceSpec::weak_morrey(q, kappa * q, th_out).with_rho(rho_v), stats, &fb.balls, &fb.rho)?;
        let strong = norm_from_stats(&SpaceSpec::morrey(q, kappa * q, th_out).with_rho(rho_v), stats, &fb.balls, &fb.rho)?;
        if weak.value > strong.value * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    report.diagnostics.push(Diagnostic {
        label: "weak_exceeds_strong".into(),
        param: Some(out_stats.len() as f64),
        value: violations as f64,
        passed: Some(violations == 0),
    });
    Ok(report)
}

/// Boundedness sweep for `L^{p,κ}_{ρ,θ} → C^β_{ρ,θ'}` with `β = Q(κ/p − 1/q)`; BMO at `κ = p/q`.
pub fn run_hoelder_boundedness(cfg: &ExperimentConfig) -> Result<RatioReport> {
    let d = cfg.validate(Experiment::ThmHoelder)?;
    let (p, q, beta) = (cfg.p, d.q, d.beta);
    let st = setup(cfg, &cfg.potential)?;
    let fields = fields_for(cfg, &st.family)?;
    let fs: Vec<&TestFunction> = st.family.iter().map(|nf| &nf.f).collect();
    let per: Vec<&FnBalls> = st.per.iter().collect();
    let in_stats = stats_for(&fs, p, &per, &cfg.quadrature)?;
    let out_stats = stats_for(&fields, q, &per, &cfg.quadrature)?;
    let mut report = RatioReport {
        experiment: Experiment::ThmHoelder.name().into(),
        ..Default::default()
    };
    let rho_v = cfg.potential;
    let input = SpaceSpec::morrey(p, cfg.kappa, cfg.theta).with_rho(rho_v);
    let output = |th: f64| {
        if beta == 0.0 {
            SpaceSpec::bmo(th).with_rho(rho_v)
        } else {
            SpaceSpec::hoelder(beta, th).with_rho(rho_v)
        }
    };
    theta_sweep(cfg, &st, input, output, &in_stats, &out_stats, &mut report)?;
    report.diagnostics.push(Diagnostic {
        label: if beta == 0.0 { "bmo_target" } else { "beta" }.into(),
        param: None,
        value: beta,
        passed: None,
    });
    Ok(report)
}

/// `‖I_α f‖_{L^q}` (or weak `L^q` when `p = 1`) over `‖f‖_{L^p}` for one function.
fn hls_ratio(cfg: &ExperimentConfig, f: &TestFunction, q: f64) -> Result<(f64, f64)> {
    let field = fractional_field(&cfg.potential, f, &cfg.subordination_spec(), &cfg.trotter)?;
    let center = field.center().clone();
    let domain = Ball::new(center, 1e3 * field.length())?;
    let input = lebesgue_norm(f, cfg.p, &domain, &cfg.quadrature)?;
    let output = if cfg.p == 1.0 {
        weak_lebesgue_norm_sampled(&*field, q, &domain, &cfg.quadrature)?
    } else {
        lebesgue_norm(&*field, q, &domain, &cfg.quadrature)?
    };
    Ok((input, output))
}

/// Hardy–Littlewood–Sobolev ratios `‖I_α f‖_{L^q} / ‖f‖_{L^p}` (weak `L^q` for `p = 1`).
pub fn run_hls(cfg: &ExperimentConfig) -> Result<RatioReport> {
    let d = cfg.validate(Experiment::Hls)?;
    let q = d.q;
    let n_base = cfg.functions.count;
    let family = test_family(cfg, 2 * n_base)?;
    let pairs: Vec<(f64, f64)> = exec::map_slice(&family, |nf| hls_ratio(cfg, &nf.f, q))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut report = RatioReport {
        experiment: Experiment::Hls.name().into(),
        ..Default::default()
    };
    let series = if cfg.p == 1.0 { "hls-weak" } else { "hls" };
    let (mut max_base, mut max_full) = (0.0f64, 0.0f64);
    for (i, (nf, &(inp, out))) in family.iter().zip(&pairs).enumerate() {
        let ratio = out / inp;
        max_full = max_full.max(ratio);
        if i < n_base {
            max_base = max_base.max(ratio);
            report.rows.push(RatioRow {
                series: series.into(),
                label: nf.label.clone(),
                param: q,
                input_norm: inp,
                output_norm: out,
                ratio,
                output: crate::spaces::NormReport {
                    value: out,
                    witness: Ball::new(
                        nf.f.radial_center().cloned().unwrap_or_else(|| GroupElement::identity(cfg.n)),
                        1e3 * nf.f.scale(),
                    )?,
                    balls_tested: 1,
                    convergence: 1.0,
                    scale_growth: 1.0,
                    stabilized: true,
                },
            });
        }
    }
    report.summaries.push(Summary::new(series, q, max_base, max_full));

    if cfg.potential.is_zero() && !cfg.dilations.is_empty() {
        let base: Vec<&NamedFunction> = family[..n_base].iter().filter(|nf| nf.is_bump()).collect();
        let mut maxima = Vec::new();
        for &a in &cfg.dilations {
            let ratios: Vec<f64> = exec::map_slice(&base, |nf| {
                let g = nf.f.dilated(a).ok_or_else(|| invalid("cannot dilate"))?;
                let (i, o) = hls_ratio(cfg, &g, q)?;
                Ok(o / i)
            })
            .into_iter()
            .collect::<Result<_>>()?;
            let m = ratios.iter().copied().fold(0.0, f64::max);
            report.diagnostics.push(Diagnostic {
                label: "dilated_max_ratio".into(),
                param: Some(a),
                value: m,
                passed: None,
            });
            maxima.push(m);
        }
        let spread = spread(&maxima);
        report.diagnostics.push(Diagnostic {
            label: "scale_spread".into(),
            param: None,
            value: spread,
            passed: Some(spread <= 0.05),
        });
    }
    Ok(report)
}

/// `max/min − 1`.
pub fn spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo - 1.0
}

/// Free-case checks with `V = 0`, `θ = 0`: Morrey, weak Morrey and Hölder
/// targets of `(−Δ)^{−α/2}`, the gradient (Morrey-lemma) relation in both
/// orientations, and dilation invariance of the Morrey ratio.
pub fn run_free_case(cfg: &ExperimentConfig) -> Result<RatioReport> {
    let d = cfg.validate(Experiment::FreeCase)?;
    let fc = &cfg.free_case;
    let q_dim = d.q_dim;
    let st = setup(cfg, &Potential::Zero)?;
    let fields = fields_for(cfg, &st.family)?;
    let fs: Vec<&TestFunction> = st.family.iter().map(|nf| &nf.f).collect();
    let per: Vec<&FnBalls> = st.per.iter().collect();
    let quad = &cfg.quadrature;
    let mut report = RatioReport {
        experiment: Experiment::FreeCase.name().into(),
        ..Default::default()
    };
    let push = |s: Series<'_>, report: &mut RatioReport| -> Result<()> {
        let summary = run_series(s, &mut report.rows)?;
        report.summaries.push(summary);
        Ok(())
    };

    // Morrey → Morrey.
    let (pm, km) = (fc.morrey.p, fc.morrey.kappa);
    let qm = d.q;
    let in_m = stats_for(&fs, pm, &per, quad)?;
    let out_m = stats_for(&fields, qm, &per, quad)?;
    push(
        Series {
            name: "morrey".into(),
            param: km,
            input: SpaceSpec::morrey(pm, km, 0.0),
            output: SpaceSpec::morrey(qm, km * qm / pm, 0.0),
            in_stats: &in_m,
            out_stats: &out_m,
            labels: labels(&st.family),
            per: st.per.iter().collect(),
            n_base: st.n_base,
        },
        &mut report,
    )?;

    // L^{1,κ} → WL^{q,κq}.
    let qw = q_dim / (q_dim - cfg.alpha);
    let kw = fc.weak_kappa;
    let in_w = stats_for(&fs, 1.0, &per, quad)?;
    let out_w = stats_for(&fields, qw, &per, quad)?;
    push(
        Series {
            name: "weak".into(),
            param: kw,
            input: SpaceSpec::morrey(1.0, kw, 0.0),
            output: SpaceSpec::weak_morrey(qw, kw * qw, 0.0),
            in_stats: &in_w,
            out_stats: &out_w,
            labels: labels(&st.family),
            per: st.per.iter().collect(),
            n_base: st.n_base,
        },
        &mut report,
    )?;

    // Morrey → Hölder.
    let (ph, kh) = (fc.hoelder.p, fc.hoelder.kappa);
    let qh = 1.0 / (1.0 / ph - cfg.alpha / q_dim);
    let beta = hoelder_beta(ph, qh, kh, q_dim)?;
    let in_h = stats_for(&fs, ph, &per, quad)?;
    let out_h = if qh == qm { out_m.clone() } else { stats_for(&fields, qh, &per, quad)? };
    let target = if beta == 0.0 {
        SpaceSpec::bmo(0.0)
    } else {
        SpaceSpec::hoelder(beta, 0.0)
    };
    push(
        Series {
            name: "hoelder".into(),
            param: beta,
            input: SpaceSpec::morrey(ph, kh, 0.0),
            output: target,
            in_stats: &in_h,
            out_stats: &out_h,
            labels: labels(&st.family),
            per: st.per.iter().collect(),
            n_base: st.n_base,
        },
        &mut report,
    )?;

    // Gradient relation on the bumps, both orientations.
    let (pl, kl) = (fc.lemma.p, fc.lemma.kappa);
    let bl = lemma_beta(fc.lemma, q_dim)?;
    let bumps: Vec<&NamedFunction> = st.family.iter().filter(|nf| nf.is_bump()).collect();
    let n_bumps = st.family[..st.n_base].iter().filter(|nf| nf.is_bump()).count();
    let bump_fs: Vec<&TestFunction> = bumps.iter().map(|nf| &nf.f).collect();
    let grads: Vec<GradientNorm<'_, TestFunction>> = bump_fs.iter().map(|f| GradientNorm { f: *f }).collect();
    let grad_refs: Vec<&GradientNorm<'_, TestFunction>> = grads.iter().collect();
    let bump_per: Vec<&FnBalls> = st.family.iter().zip(&st.per).filter(|(nf, _)| nf.is_bump()).map(|(_, fb)| fb).collect();
    let f_stats = stats_for(&bump_fs, pl, &bump_per, quad)?;
    let g_stats = stats_for(&grad_refs, pl, &bump_per, quad)?;
    let bump_labels: Vec<&str> = bumps.iter().map(|nf| nf.label.as_str()).collect();
    let hoelder_l = if bl == 0.0 { SpaceSpec::bmo(0.0) } else { SpaceSpec::hoelder(bl, 0.0) };
    push(
        Series {
            name: "lemma-standard".into(),
            param: bl,
            input: SpaceSpec::morrey(pl, kl, 0.0),
            output: hoelder_l,
            in_stats: &g_stats,
            out_stats: &f_stats,
            labels: bump_labels.clone(),
            per: bump_per.clone(),
            n_base: n_bumps,
        },
        &mut report,
    )?;
    push(
        Series {
            name: "lemma-reversed".into(),
            param: bl,
            input: SpaceSpec::morrey(pl, kl, 0.0),
            output: hoelder_l,
            in_stats: &f_stats,
            out_stats: &g_stats,
            labels: bump_labels,
            per: bump_per,
            n_base: n_bumps,
        },
        &mut report,
    )?;
    report.primary = 0;

    // Dilating functions and balls together leaves every ratio unchanged.
    if !cfg.dilations.is_empty() {
        let mut maxima = Vec::new();
        for &a in &cfg.dilations {
            let family: Vec<TestFunction> = st.family[..st.n_base]
                .iter()
                .map(|nf| nf.f.dilated(a).ok_or_else(|| invalid("cannot dilate")))
                .collect::<Result<_>>()?;
            let named: Vec<NamedFunction> = family
                .iter()
                .map(|f| NamedFunction {
                    label: String::new(),
                    f: f.clone(),
                })
                .collect();
            let dfields = fields_for(cfg, &named)?;
            let mut m: f64 = 0.0;
            for ((f, field), fb) in family.iter().zip(&dfields).zip(&st.per) {
                let balls: Vec<Ball> = fb.balls[..fb.base]
                    .iter()
                    .map(|b| Ball {
                        center: b.center.dilate(a),
                        radius: a * b.radius,
                    })
                    .collect();
                let rho = vec![f64::INFINITY; balls.len()];
                let si = ball_stats(f, pm, &balls, quad)?;
                let so = ball_stats(&**field, qm, &balls, quad)?;
                let i = norm_from_stats(&SpaceSpec::morrey(pm, km, 0.0), &si, &balls, &rho)?;
                let o = norm_from_stats(&SpaceSpec::morrey(qm, km * qm / pm, 0.0), &so, &balls, &rho)?;
                m = m.max(o.value / i.value);
            }
            report.diagnostics.push(Diagnostic {
                label: "dilated_max_ratio".into(),
                param: Some(a),
                value: m,
                passed: None,
            });
            maxima.push(m);
        }
        let s = spread(&maxima);
        report.diagnostics.push(Diagnostic {
            label: "dilation_spread".into(),
            param: None,
            value: s,
            passed: Some(s <= 0.05),
        });
    }
    Ok(report)
}
