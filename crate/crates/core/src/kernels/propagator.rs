//! Grid propagation of `e^{sΔ}` and `e^{−s(−Δ+V)}` for functions that depend
//! only on `(|z|, t)` relative to a center.
//!
//! For such functions the sub-Laplacian reduces to
//! `∂_r² + ((2n−1)/r)∂_r + 4r²∂_t²` (the rotational term `y∂x − x∂y`
//! vanishes). The field lives on a cell-centered grid in `r ∈ (0, R)` and a
//! periodic grid in `t ∈ [−L, L)`. After an FFT in `t`, each frequency `μ`
//! gives the finite-volume operator `A_μ = ∂_r² + ((2n−1)/r)∂_r − 4μ²r²`
//! with a Dirichlet wall at `R`. `A_μ` is symmetrised by the cell volumes
//! and diagonalised once per grid shape, so `e^{hA_μ}` is exact in time.
//!
//! Grids are described in unit coordinates and attached to a physical length
//! `ℓ`: the node `(ρ_i, τ_j)` sits at `r = ℓρ_i`, `t = ℓ²τ_j` and a physical
//! time `h` is the unit time `h/ℓ²`. One diagonalisation therefore serves
//! every length scale.

use nalgebra::{DMatrix, SymmetricEigen};
use once_cell::sync::Lazy;
use parking_lot::Mutex;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::group::sphere_area;
use crate::kernels::heat::heat_kernel_t_fourier;
use crate::potential::Potential;

/// Unit-scale grid shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadialGrid {
    pub nr: usize,
    pub nt: usize,
    /// Radial extent `R` in units of `ℓ`.
    pub r_extent: f64,
    /// Half-period `L` of the `t`-grid in units of `ℓ²`.
    pub t_extent: f64,
}

impl Default for RadialGrid {
    /// Evolutions keep the field at unit times in `(1/8, 1/4]`; the `t`-step
    /// resolves the heat kernel's `t`-spectrum `~e^{−4|μ|s}` there to `1e−8`.
    fn default() -> Self {
        Self {
            nr: 160,
            nt: 384,
            r_extent: 7.0,
            t_extent: 16.0,
        }
    }
}

impl RadialGrid {
    pub fn validate(&self) -> Result<()> {
        if self.nr < 8 || self.nt < 8 || !self.nt.is_multiple_of(2) {
            return Err(invalid("grid needs nr >= 8 and an even nt >= 8"));
        }
        if !(self.r_extent > 0.0 && self.t_extent > 0.0) {
            return Err(invalid("grid extents must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrotterSpec {
    /// Trotter steps `m`: the step never exceeds `s/m` when propagating to time `s`.
    pub steps: usize,
    pub grid: RadialGrid,
    /// Multiplier of the truncation radius of the pointwise heat quadrature.
    pub truncation: f64,
}

impl Default for TrotterSpec {
    fn default() -> Self {
        Self {
            steps: 32,
            grid: RadialGrid::default(),
            truncation: 1.0,
        }
    }
}

impl TrotterSpec {
    pub fn with_steps(self, steps: usize) -> Self {
        Self { steps, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(invalid("Trotter step count must be at least 1"));
        }
        self.grid.validate()
    }
}

struct ModeEigen {
    vectors: Vec<f64>,
    values: Vec<f64>,
}

/// Grid geometry, FFT plans and per-mode eigendecompositions.
pub struct GridOps {
    pub n: usize,
    pub shape: RadialGrid,
    dr: f64,
    dt: f64,
    r: Vec<f64>,
    vol: Vec<f64>,
    sqrt_vol: Vec<f64>,
    modes: Vec<ModeEigen>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

type GridKey = (usize, usize, usize, u64, u64);

static GRID_CACHE: Lazy<Mutex<HashMap<GridKey, Arc<GridOps>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

impl GridOps {
    pub fn get(n: usize, shape: RadialGrid) -> Result<Arc<GridOps>> {
        shape.validate()?;
        let key = (n, shape.nr, shape.nt, shape.r_extent.to_bits(), shape.t_extent.to_bits());
        if let Some(ops) = GRID_CACHE.lock().get(&key) {
            return Ok(ops.clone());
        }
        let ops = Arc::new(Self::build(n, shape));
        GRID_CACHE.lock().insert(key, ops.clone());
        Ok(ops)
    }

    fn build(n: usize, shape: RadialGrid) -> Self {
        let nr = shape.nr;
        let dr = shape.r_extent / nr as f64;
        let dt = 2.0 * shape.t_extent / shape.nt as f64;
        let p = (2 * n) as i32;
        let r: Vec<f64> = (0..nr).map(|i| (i as f64 + 0.5) * dr).collect();
        let vol: Vec<f64> = (0..nr)
            .map(|i| (((i + 1) as f64 * dr).powi(p) - (i as f64 * dr).powi(p)) / p as f64)
            .collect();
        let sqrt_vol: Vec<f64> = vol.iter().map(|v| v.sqrt()).collect();
        let face = |i: usize| ((i + 1) as f64 * dr).powi(p - 1);
        let period = 2.0 * shape.t_extent;
        let modes = exec::map_range(shape.nt / 2 + 1, |k| {
            let mu = 2.0 * PI * k as f64 / period;
            let mut m = DMatrix::<f64>::zeros(nr, nr);
            for i in 0..nr {
                let outer = face(i) / dr;
                let inner = if i == 0 { 0.0 } else { face(i - 1) / dr };
                m[(i, i)] = -(outer + inner) / vol[i] - 4.0 * mu * mu * r[i] * r[i];
                if i + 1 < nr {
                    let off = outer / (vol[i] * vol[i + 1]).sqrt();
                    m[(i, i + 1)] = off;
                    m[(i + 1, i)] = off;
                }
            }
            let eig = SymmetricEigen::new(m);
            let mut vectors = vec![0.0; nr * nr];
            for i in 0..nr {
                for j in 0..nr {
                    vectors[i * nr + j] = eig.eigenvectors[(i, j)];
                }
            }
            ModeEigen {
                vectors,
                values: eig.eigenvalues.iter().copied().collect(),
            }
        });
        let mut planner = FftPlanner::new();
        Self {
            n,
            shape,
            dr,
            dt,
            r,
            vol,
            sqrt_vol,
            modes,
            fft: planner.plan_fft_forward(shape.nt),
            ifft: planner.plan_fft_inverse(shape.nt),
        }
    }

    fn tau(&self, j: usize) -> f64 {
        let nt = self.shape.nt;
        if j < nt / 2 {
            j as f64 * self.dt
        } else {
            (j as f64 - nt as f64) * self.dt
        }
    }

    fn mu(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / (2.0 * self.shape.t_extent)
    }
}

/// A field on a radial grid attached to a physical length `scale`.
#[derive(Clone)]
pub struct RadialField {
    ops: Arc<GridOps>,
    scale: f64,
    data: Vec<f64>,
}

impl RadialField {
    /// Sample `f(r, t)` (physical coordinates) on the grid.
    pub fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(ops: Arc<GridOps>, scale: f64, f: F) -> Self {
        let (nr, nt) = (ops.shape.nr, ops.shape.nt);
        let mut data = vec![0.0; nr * nt];
        exec::for_each_chunk_mut(&mut data, nt, |i, row| {
            let r = scale * ops.r[i];
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(r, scale * scale * ops.tau(j));
            }
        });
        Self { ops, scale, data }
    }

    /// The heat kernel `H_s(z, t)` (group law) at physical time `s`, built
    /// from its exact partial Fourier transform in `t`.
    pub fn heat_kernel(ops: Arc<GridOps>, scale: f64, s: f64) -> Self {
        let (nr, nt) = (ops.shape.nr, ops.shape.nt);
        let n = ops.n;
        let unit_s = s / (scale * scale);
        let mut spec = vec![Complex::new(0.0, 0.0); nr * nt];
        exec::for_each_chunk_mut(&mut spec, nt, |i, row| {
            for (k, c) in row.iter_mut().enumerate() {
                let kk = if k <= nt / 2 { k } else { nt - k };
                c.re = heat_kernel_t_fourier(n, unit_s, ops.r[i], ops.mu(kk));
            }
            ops.ifft.process(row);
        });
        let norm = 1.0 / (2.0 * ops.shape.t_extent) * scale.powi(-(2 * n as i32 + 2));
        let data = spec.iter().map(|c| c.re * norm).collect();
        Self { ops, scale, data }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn ops(&self) -> &Arc<GridOps> {
        &self.ops
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ field` over `H^n`.
    pub fn mass(&self) -> f64 {
        let nt = self.ops.shape.nt;
        let q = 2 * self.ops.n as i32 + 2;
        let sum: f64 = (0..self.ops.shape.nr)
            .map(|i| self.ops.vol[i] * self.data[i * nt..(i + 1) * nt].iter().sum::<f64>())
            .sum();
        sum * self.ops.dt * sphere_area(self.ops.n) * self.scale.powi(q)
    }

    /// Share of `∫|field|` in the outer 15% of the box in `r` or `t`.
    pub fn boundary_fraction(&self) -> f64 {
        let (nr, nt) = (self.ops.shape.nr, self.ops.shape.nt);
        let r_cut = 0.85 * self.ops.shape.r_extent;
        let t_cut = 0.85 * self.ops.shape.t_extent;
        let (mut edge, mut total) = (0.0, 0.0);
        for i in 0..nr {
            for j in 0..nt {
                let w = self.ops.vol[i] * self.data[i * nt + j].abs();
                total += w;
                if self.ops.r[i] > r_cut || self.ops.tau(j).abs() > t_cut {
                    edge += w;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            edge / total
        }
    }

    pub fn check_resolved(&self, tol: f64) -> Result<()> {
        let frac = self.boundary_fraction();
        if frac > tol {
            return Err(Error::UnderResolved(format!(
                "{frac:.2e} of the field mass sits at the grid boundary (tolerance {tol:.0e})"
            )));
        }
        Ok(())
    }

    /// Exact heat flow `e^{hΔ}` for physical time `h`, optionally damped by `e^{−hc}`.
    pub fn heat_step(&mut self, h: f64) {
        if h <= 0.0 {
            return;
        }
        let ops = self.ops.clone();
        let (nr, nt) = (ops.shape.nr, ops.shape.nt);
        let unit_h = h / (self.scale * self.scale);
        let mut spec: Vec<Complex<f64>> = self.data.iter().map(|&v| Complex::new(v, 0.0)).collect();
        exec::for_each_chunk_mut(&mut spec, nt, |_, row| ops.fft.process(row));
        let half = nt / 2 + 1;
        let mut modes = vec![Complex::new(0.0, 0.0); half * nr];
        for i in 0..nr {
            for k in 0..half {
                modes[k * nr + i] = spec[i * nt + k];
            }
        }
        exec::for_each_chunk_mut(&mut modes, nr, |k, v| {
            let eig = &ops.modes[k];
            let mut re: Vec<f64> = (0..nr).map(|i| v[i].re * ops.sqrt_vol[i]).collect();
            let mut im: Vec<f64> = (0..nr).map(|i| v[i].im * ops.sqrt_vol[i]).collect();
            let mut yr = vec![0.0; nr];
            let mut yi = vec![0.0; nr];
            for i in 0..nr {
                let row = &eig.vectors[i * nr..(i + 1) * nr];
                let (a, b) = (re[i], im[i]);
                for j in 0..nr {
                    yr[j] += a * row[j];
                    yi[j] += b * row[j];
                }
            }
            for j in 0..nr {
                let e = (unit_h * eig.values[j]).exp();
                yr[j] *= e;
                yi[j] *= e;
            }
            for i in 0..nr {
                let row = &eig.vectors[i * nr..(i + 1) * nr];
                let (mut a, mut b) = (0.0, 0.0);
                for j in 0..nr {
                    a += row[j] * yr[j];
                    b += row[j] * yi[j];
                }
                re[i] = a;
                im[i] = b;
            }
            for i in 0..nr {
                v[i] = Complex::new(re[i] / ops.sqrt_vol[i], im[i] / ops.sqrt_vol[i]);
            }
        });
        for i in 0..nr {
            for k in 0..half {
                spec[i * nt + k] = modes[k * nr + i];
            }
            for k in half..nt {
                spec[i * nt + k] = spec[i * nt + nt - k].conj();
            }
        }
        exec::for_each_chunk_mut(&mut spec, nt, |_, row| ops.ifft.process(row));
        let inv = 1.0 / nt as f64;
        for (d, c) in self.data.iter_mut().zip(&spec) {
            *d = c.re * inv;
        }
    }

    /// Multiply by `e^{−h V}` with `V` evaluated in the field's local coordinates.
    pub fn apply_potential(&mut self, v: &Potential, h: f64) {
        if let Some(c) = v.constant_value() {
            let f = (-h * c).exp();
            self.data.iter_mut().for_each(|d| *d *= f);
            return;
        }
        let Potential::HomogeneousPower { a, scale: kappa } = *v else {
            unreachable!("non-constant potentials are homogeneous powers")
        };
        let ops = self.ops.clone();
        let nt = ops.shape.nt;
        let ell = self.scale;
        exec::for_each_chunk_mut(&mut self.data, nt, |i, row| {
            let r = ell * ops.r[i];
            for (j, d) in row.iter_mut().enumerate() {
                let t = ell * ell * ops.tau(j);
                let norm = (r.powi(4) + t * t).sqrt().sqrt();
                *d *= (-h * kappa * norm.powf(a)).exp();
            }
        });
    }

    /// Strang-split Trotter product over physical time `s` with `steps` steps:
    /// `e^{−hV/2} e^{hΔ} e^{−hV/2}` repeated.
    pub fn propagate(&mut self, v: &Potential, s: f64, steps: usize) {
        if s <= 0.0 {
            return;
        }
        if let Some(c) = v.constant_value() {
            if c == 0.0 {
                self.heat_step(s);
                return;
            }
        }
        let steps = steps.max(1);
        let h = s / steps as f64;
        self.apply_potential(v, 0.5 * h);
        for k in 0..steps {
            self.heat_step(h);
            let w = if k + 1 == steps { 0.5 * h } else { h };
            self.apply_potential(v, w);
        }
    }

    /// Catmull–Rom interpolation at physical `(r, t)`; zero outside the box.
    pub fn eval(&self, r: f64, t: f64) -> f64 {
        let ops = &self.ops;
        let (nr, nt) = (ops.shape.nr, ops.shape.nt);
        let x = r.abs() / self.scale / ops.dr - 0.5;
        let tau = t / (self.scale * self.scale);
        if x > nr as f64 - 0.5 || tau.abs() > ops.shape.t_extent {
            return 0.0;
        }
        let y = tau / ops.dt;
        let (ix, fx) = (x.floor(), x - x.floor());
        let (iy, fy) = (y.floor(), y - y.floor());
        let wx = catmull_rom(fx);
        let wy = catmull_rom(fy);
        let mut acc = 0.0;
        for (a, wa) in wx.iter().enumerate() {
            let mut i = ix as i64 + a as i64 - 1;
            if i < 0 {
                i = -i - 1;
            }
            if i as usize >= nr {
                continue;
            }
            let row = &self.data[i as usize * nt..(i as usize + 1) * nt];
            let mut line = 0.0;
            for (b, wb) in wy.iter().enumerate() {
                let j = (iy as i64 + b as i64 - 1).rem_euclid(nt as i64) as usize;
                line += wb * row[j];
            }
            acc += wa * line;
        }
        acc
    }

    /// Resample onto a grid (possibly of another shape) at a new length scale.
    pub fn regrid(&self, ops: Arc<GridOps>, scale: f64) -> RadialField {
        RadialField::from_fn(ops, scale, |r, t| self.eval(r, t))
    }
}

fn catmull_rom(f: f64) -> [f64; 4] {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        0.5 * (-f3 + 2.0 * f2 - f),
        0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
        0.5 * (-3.0 * f3 + 4.0 * f2 + f),
        0.5 * (f3 - f2),
    ]
}

/// How a field evolution was started.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// A test function of the given length scale.
    Function,
    /// The point mass at the identity.
    PointSource,
}

/// A field carried forward in time with Trotter steps, moving to coarser
/// grids (`ℓ → √2ℓ`) whenever `√s` exceeds `ℓ/2`.
pub struct Evolution {
    field: RadialField,
    time: f64,
    potential: Potential,
    spec: TrotterSpec,
    collapse_constant: bool,
    source: Source,
}

impl Evolution {
    /// Start from `profile(r, t)` (local coordinates) at length scale `scale`.
    pub fn from_function<F: Fn(f64, f64) -> f64 + Sync>(n: usize, profile: F, scale: f64, potential: Potential, spec: TrotterSpec) -> Result<Self> {
        spec.validate()?;
        potential.validate()?;
        let ops = GridOps::get(n, spec.grid)?;
        Ok(Self {
            field: RadialField::from_fn(ops, scale, profile),
            time: 0.0,
            potential,
            spec,
            collapse_constant: true,
            source: Source::Function,
        })
    }

    /// Start from `P_{s₀}(·, 0) ≈ e^{−s₀V/2} H_{s₀} e^{−s₀V(0)/2}`.
    pub fn from_point_source(n: usize, s0: f64, potential: Potential, spec: TrotterSpec) -> Result<Self> {
        spec.validate()?;
        potential.validate()?;
        let ops = GridOps::get(n, spec.grid)?;
        let mut field = RadialField::heat_kernel(ops, 2.0 * s0.sqrt(), s0);
        field.apply_potential(&potential, 0.5 * s0);
        let v0 = potential.evaluate(&crate::group::GroupElement::identity(n));
        let damp = (-0.5 * s0 * v0).exp();
        field.data.iter_mut().for_each(|d| *d *= damp);
        Ok(Self {
            field,
            time: s0,
            potential,
            spec,
            collapse_constant: true,
            source: Source::PointSource,
        })
    }

    /// Run the full Trotter loop even for constant potentials.
    pub fn uncollapsed(mut self) -> Self {
        self.collapse_constant = false;
        self
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn field(&self) -> &RadialField {
        &self.field
    }

    pub fn source(&self) -> Source {
        self.source
    }

    fn step_to(&mut self, s: f64) {
        let dt = s - self.time;
        if dt <= 0.0 {
            return;
        }
        match self.potential.constant_value() {
            Some(c) if self.collapse_constant => {
                self.field.heat_step(dt);
                if c != 0.0 {
                    let f = (-c * dt).exp();
                    self.field.data.iter_mut().for_each(|d| *d *= f);
                }
            }
            _ => {
                let m = ((self.spec.steps as f64) * dt / s).ceil().max(1.0) as usize;
                self.field.propagate(&self.potential, dt, m);
            }
        }
        self.time = s;
    }

    /// Advance to time `s ≥ time()`.
    pub fn advance_to(&mut self, s: f64) -> Result<()> {
        if s < self.time {
            return Err(invalid("evolution cannot run backwards"));
        }
        loop {
            let limit = 0.25 * self.field.scale * self.field.scale * (1.0 + 1e-12);
            if s <= limit {
                self.step_to(s);
                break;
            }
            self.step_to(limit);
            let ops = self.field.ops.clone();
            let before = self.field.mass();
            self.field = self.field.regrid(ops, std::f64::consts::SQRT_2 * self.field.scale);
            // Resampling should not change the integral; undo its O(dr²) bias.
            let after = self.field.mass();
            if before != 0.0 && (after / before - 1.0).abs() < 1e-2 {
                let f = before / after;
                self.field.data.iter_mut().for_each(|d| *d *= f);
            }
        }
        self.field.check_resolved(1e-3)
    }

    /// Field value at a point given in local coordinates `(|z|, t)`.
    pub fn eval(&self, r: f64, t: f64) -> f64 {
        self.field.eval(r, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::heat::{heat_kernel_zt, HeatQuadrature};

    #[test]
    fn exact_source_matches_lambda_integral() {
        let ops = GridOps::get(1, RadialGrid::default()).unwrap();
        let s: f64 = 0.3;
        let field = RadialField::heat_kernel(ops, 2.0 * s.sqrt(), s);
        let hq = HeatQuadrature::default();
        for (r, t) in [(0.0, 0.0), (0.4, 0.1), (0.9, -0.7), (0.2, 1.5)] {
            let exact = heat_kernel_zt(1, s, r * r, t, &hq).unwrap();
            let got = field.eval(r, t);
            assert!(
                (got - exact).abs() < 2e-3 * heat_kernel_zt(1, s, 0.0, 0.0, &hq).unwrap(),
                "{r} {t}: {got} {exact}"
            );
        }
        assert!((field.mass() - 1.0).abs() < 1e-3, "{}", field.mass());
    }

    #[test]
    fn grid_heat_flow_follows_the_kernel() {
        let ops = GridOps::get(1, RadialGrid::default()).unwrap();
        let ell = 2.0 * 0.5f64.sqrt();
        let mut field = RadialField::heat_kernel(ops.clone(), ell, 0.25);
        field.heat_step(0.25);
        let direct = RadialField::heat_kernel(ops, ell, 0.5);
        let peak = direct.max_abs();
        let worst = field.values().iter().zip(direct.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst < 3e-3 * peak, "{worst} vs {peak}");
    }

    #[test]
    fn constant_potential_factorises() {
        let ops = GridOps::get(1, RadialGrid::default()).unwrap();
        let base = RadialField::from_fn(ops, 1.0, |r, t| (-(r.powi(4) + t * t).sqrt()).exp());
        let mut a = base.clone();
        a.propagate(&Potential::Constant { c: 2.0 }, 0.4, 8);
        let mut b = base;
        b.heat_step(0.4);
        let f = (-0.8f64).exp();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - f * y).abs() <= 1e-12 * b.max_abs());
        }
    }
}
