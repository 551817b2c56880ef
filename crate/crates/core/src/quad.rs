//! One-dimensional quadrature: Gauss–Legendre rules and adaptive Gauss–Kronrod.

use once_cell::sync::Lazy;
use parking_lot::Mutex;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Nodes and weights of the `k`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

static GL_CACHE: Lazy<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

impl GaussLegendre {
    pub fn new(k: usize) -> Arc<Self> {
        assert!(k >= 1, "Gauss-Legendre order must be positive");
        GL_CACHE.lock().entry(k).or_insert_with(|| Arc::new(Self::compute(k))).clone()
    }

    fn compute(k: usize) -> Self {
        let mut nodes = vec![0.0; k];
        let mut weights = vec![0.0; k];
        let kf = k as f64;
        for i in 0..k.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(k, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(k, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[k - 1 - i] = x;
            weights[i] = w;
            weights[k - 1 - i] = w;
        }
        if k % 2 == 1 {
            nodes[k / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// `∫_a^b f` with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (m + h * x, w * h))
    }
}

fn legendre(k: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if k == 0 {
        return (1.0, 0.0);
    }
    let d = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre nodes on `[a, b]` split into `panels` equal panels.
pub fn composite_gl(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(order);
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let lo = a + p as f64 * h;
            gl.mapped(lo, lo + h).collect::<Vec<_>>()
        })
        .collect()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate on `[a, b]` with the QUADPACK error estimate
/// (scaled Gauss–Kronrod difference with a roundoff floor).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut fv = [0.0; 15];
    fv[7] = f(c);
    for j in 0..7 {
        let dx = h * XGK[j];
        fv[j] = f(c - dx);
        fv[14 - j] = f(c + dx);
    }
    let w = |j: usize| WGK[j.min(14 - j)];
    let mut rk = 0.0;
    let mut rabs = 0.0;
    for (j, v) in fv.iter().enumerate() {
        rk += w(j) * v;
        rabs += w(j) * v.abs();
    }
    let mut rg = WG[3] * fv[7];
    for j in (1..7).step_by(2) {
        rg += WG[j / 2] * (fv[j] + fv[14 - j]);
    }
    let mean = 0.5 * rk;
    let rasc: f64 = fv.iter().enumerate().map(|(j, v)| w(j) * (v - mean).abs()).sum();
    let (rk, rabs, rasc) = (rk * h, rabs * h.abs(), rasc * h.abs());
    let mut err = (rk - rg * h).abs();
    if rasc != 0.0 && err != 0.0 {
        err = rasc * (200.0 * err / rasc).powf(1.5).min(1.0);
    }
    if rabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * rabs);
    }
    (rk, err)
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of integrand evaluations.
    pub max_evals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: 1e-12,
            max_evals: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`, starting
/// from `initial` equal panels and bisecting the worst panel until the
/// requested tolerance is met.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, initial: usize, opts: AdaptiveOptions) -> Result<Estimate> {
    let initial = initial.max(1);
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    let h = (b - a) / initial as f64;
    for p in 0..initial {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == initial { b } else { lo + h };
        let (value, error) = gk15(&mut f, lo, hi);
        evals += 15;
        heap.push(Segment { a: lo, b: hi, value, error });
    }
    loop {
        let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tol || error < 1e-300 {
            return Ok(Estimate { value, error, evals });
        }
        if evals + 30 > opts.max_evals {
            return Err(Error::NonConvergence(format!(
                "adaptive Gauss-Kronrod exceeded {} evaluations (value {value:e}, error {error:e})",
                opts.max_evals
            )));
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further; accept what we have.
            heap.push(worst);
            let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
            return Ok(Estimate { value, error, evals });
        }
        for (lo, hi) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(&mut f, lo, hi);
            heap.push(Segment { a: lo, b: hi, value, error });
        }
        evals += 30;
    }
}
