//! Thermodynamic metrics on control space, path lengths, geodesic solving,
//! and equal-length discretization of protocols.
//!
//! Paths are dense samplings on a uniform grid in t ∈ [0, 1] with monotone
//! cubic (Fritsch-Carlson) interpolation, so closed-form and tabulated paths
//! get identical treatment. Geodesics are solved by arc-length inversion in
//! one control dimension, which is where the production models live.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::{gibbs_state, log_mean_raw, GibbsState, HermitianOperator};

pub const DEFAULT_PATH_RESOLUTION: usize = 2048;

/// A continuous map t ∈ [0, 1] → v ∈ R^d stored as uniform samples with
/// monotone cubic interpolation per component.
#[derive(Debug, Clone)]
pub struct SampledPath {
    dims: usize,
    /// samples[k][i]: component k at grid index i
    samples: Vec<Vec<f64>>,
    /// node derivatives (in t) per component
    derivs: Vec<Vec<f64>>,
}

impl SampledPath {
    pub fn from_fn<F: Fn(f64) -> Vec<f64>>(dims: usize, resolution: usize, f: F) -> Result<Self> {
        let m = resolution.max(2);
        let mut samples = vec![Vec::with_capacity(m); dims];
        for i in 0..m {
            let t = i as f64 / (m - 1) as f64;
            let v = f(t);
            if v.len() != dims {
                return Err(Error::DimensionMismatch(dims, v.len()));
            }
            for (k, x) in v.iter().enumerate() {
                if !x.is_finite() {
                    return Err(Error::domain(format!("non-finite path value at t = {t}")));
                }
                samples[k].push(*x);
            }
        }
        Ok(Self::from_uniform_samples(samples))
    }

    /// Straight ramp between two control points.
    pub fn linear(v0: &[f64], v1: &[f64], resolution: usize) -> Result<Self> {
        if v0.len() != v1.len() || v0.is_empty() {
            return Err(Error::DimensionMismatch(v0.len(), v1.len()));
        }
        let d = v0.len();
        Self::from_fn(d, resolution, |t| {
            (0..d).map(|k| v0[k] + t * (v1[k] - v0[k])).collect()
        })
    }

    /// Wraps per-component uniform samples (outer index = component).
    pub fn from_uniform_samples(samples: Vec<Vec<f64>>) -> Self {
        let dims = samples.len();
        let derivs = samples.iter().map(|s| pchip_derivatives(s)).collect();
        Self { dims, samples, derivs }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn resolution(&self) -> usize {
        self.samples[0].len()
    }

    pub fn start(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s[0]).collect()
    }

    pub fn end(&self) -> Vec<f64> {
        self.samples.iter().map(|s| *s.last().unwrap()).collect()
    }

    pub fn value(&self, t: f64) -> Vec<f64> {
        (0..self.dims).map(|k| self.component(k, t)).collect()
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        (0..self.dims).map(|k| self.component_velocity(k, t)).collect()
    }

    pub fn component(&self, k: usize, t: f64) -> f64 {
        let (i, u, h) = self.locate(t);
        let (y0, y1) = (self.samples[k][i], self.samples[k][i + 1]);
        let (m0, m1) = (self.derivs[k][i], self.derivs[k][i + 1]);
        hermite(y0, y1, m0 * h, m1 * h, u)
    }

    pub fn component_velocity(&self, k: usize, t: f64) -> f64 {
        let (i, u, h) = self.locate(t);
        let (y0, y1) = (self.samples[k][i], self.samples[k][i + 1]);
        let (m0, m1) = (self.derivs[k][i], self.derivs[k][i + 1]);
        hermite_deriv(y0, y1, m0 * h, m1 * h, u) / h
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let m = self.resolution();
        let h = 1.0 / (m - 1) as f64;
        let t = t.clamp(0.0, 1.0);
        let i = ((t / h).floor() as usize).min(m - 2);
        (i, (t - i as f64 * h) / h, h)
    }
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, u: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    y0 * (2.0 * u3 - 3.0 * u2 + 1.0)
        + d0 * (u3 - 2.0 * u2 + u)
        + y1 * (-2.0 * u3 + 3.0 * u2)
        + d1 * (u3 - u2)
}

fn hermite_deriv(y0: f64, y1: f64, d0: f64, d1: f64, u: f64) -> f64 {
    let u2 = u * u;
    y0 * (6.0 * u2 - 6.0 * u)
        + d0 * (3.0 * u2 - 4.0 * u + 1.0)
        + y1 * (-6.0 * u2 + 6.0 * u)
        + d1 * (3.0 * u2 - 2.0 * u)
}

/// Fritsch-Carlson monotone slopes on a uniform grid (grid spacing folded out).
fn pchip_derivatives(y: &[f64]) -> Vec<f64> {
    let m = y.len();
    let h = 1.0 / (m - 1) as f64;
    let sec: Vec<f64> = (0..m - 1).map(|i| (y[i + 1] - y[i]) / h).collect();
    let mut d = vec![0.0; m];
    for i in 1..m - 1 {
        let (a, b) = (sec[i - 1], sec[i]);
        d[i] = if a * b <= 0.0 { 0.0 } else { 2.0 * a * b / (a + b) };
    }
    d[0] = edge_slope(sec[0], sec.get(1).copied().unwrap_or(sec[0]));
    d[m - 1] = edge_slope(sec[m - 2], if m >= 3 { sec[m - 3] } else { sec[m - 2] });
    d
}

fn edge_slope(d0: f64, d1: f64) -> f64 {
    let m = 1.5 * d0 - 0.5 * d1;
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// Basis operators {V_j}, an optional fixed offset operator, the deterministic
/// control path, and the inverse temperature.
#[derive(Debug, Clone)]
pub struct ControlSchedule {
    pub basis_ops: Vec<HermitianOperator>,
    pub offset: Option<HermitianOperator>,
    pub path: SampledPath,
    pub beta: f64,
}

impl ControlSchedule {
    pub fn new(
        basis_ops: Vec<HermitianOperator>,
        offset: Option<HermitianOperator>,
        path: SampledPath,
        beta: f64,
    ) -> Result<Self> {
        if basis_ops.is_empty() {
            return Err(Error::domain("schedule needs at least one control operator"));
        }
        if basis_ops.len() != path.dims() {
            return Err(Error::DimensionMismatch(basis_ops.len(), path.dims()));
        }
        let dim = basis_ops[0].dim();
        for op in &basis_ops {
            if op.dim() != dim {
                return Err(Error::DimensionMismatch(dim, op.dim()));
            }
        }
        if let Some(off) = &offset {
            if off.dim() != dim {
                return Err(Error::DimensionMismatch(dim, off.dim()));
            }
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { basis_ops, offset, path, beta })
    }

    pub fn controls(&self) -> usize {
        self.basis_ops.len()
    }

    /// H(v) = offset + Σ_j v^j V_j.
    pub fn hamiltonian_at(&self, v: &[f64]) -> Result<HermitianOperator> {
        if v.len() != self.controls() {
            return Err(Error::DimensionMismatch(self.controls(), v.len()));
        }
        let mut terms: Vec<(f64, &HermitianOperator)> =
            v.iter().zip(&self.basis_ops).map(|(c, op)| (*c, op)).collect();
        if let Some(off) = &self.offset {
            terms.push((1.0, off));
        }
        HermitianOperator::linear_combination(&terms)
    }

    pub fn gibbs_at(&self, v: &[f64]) -> Result<GibbsState> {
        gibbs_state(&self.hamiltonian_at(v)?, self.beta)
    }

    /// Replaces the path, keeping operators and temperature.
    pub fn with_path(&self, path: SampledPath) -> Result<Self> {
        Self::new(self.basis_ops.clone(), self.offset.clone(), path, self.beta)
    }
}

/// A field of d×d symmetric positive-semidefinite matrices over control space.
pub trait Metric: Sync {
    fn dims(&self) -> usize;
    fn eval(&self, v: &[f64]) -> Result<DMatrix<f64>>;

    /// sqrt(v̇^T g(v) v̇), the local thermodynamic speed.
    fn speed(&self, v: &[f64], vdot: &[f64]) -> Result<f64> {
        let g = self.eval(v)?;
        let mut q = 0.0;
        for i in 0..self.dims() {
            for j in 0..self.dims() {
                q += vdot[i] * g[(i, j)] * vdot[j];
            }
        }
        Ok(q.max(0.0).sqrt())
    }
}

/// Kubo (Bogoliubov) thermal metric: g_ij = beta [ Σ_ab LM(p_a, p_b)
/// (V_i)_ab (V_j)_ba − <V_i><V_j> ] in the instantaneous Gibbs eigenbasis.
/// The logarithmic mean is the closed form of the π^s ... π^{1-s} integral.
pub struct KuboMetric<'a> {
    schedule: &'a ControlSchedule,
}

impl<'a> KuboMetric<'a> {
    pub fn new(schedule: &'a ControlSchedule) -> Self {
        Self { schedule }
    }
}

impl Metric for KuboMetric<'_> {
    fn dims(&self) -> usize {
        self.schedule.controls()
    }

    fn eval(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        kubo_metric_at(self.schedule, v)
    }
}

/// Symmetric-covariance metric governing two-point-measurement work variance:
/// m_ij = beta ( Tr[{V_i, V_j} π]/2 − <V_i><V_j> ).
pub struct FluctuationMetric<'a> {
    schedule: &'a ControlSchedule,
}

impl<'a> FluctuationMetric<'a> {
    pub fn new(schedule: &'a ControlSchedule) -> Self {
        Self { schedule }
    }
}

impl Metric for FluctuationMetric<'_> {
    fn dims(&self) -> usize {
        self.schedule.controls()
    }

    fn eval(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        fluctuation_metric_at(self.schedule, v)
    }
}

/// κ·g + (1−κ)·m, the metric whose length problem is the interpolated cost.
pub struct MixtureMetric<'a> {
    schedule: &'a ControlSchedule,
    kappa: f64,
}

impl<'a> MixtureMetric<'a> {
    pub fn new(schedule: &'a ControlSchedule, kappa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::domain(format!("kappa = {kappa} outside [0, 1]")));
        }
        Ok(Self { schedule, kappa })
    }
}

impl Metric for MixtureMetric<'_> {
    fn dims(&self) -> usize {
        self.schedule.controls()
    }

    fn eval(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        let g = kubo_metric_at(self.schedule, v)?;
        let m = fluctuation_metric_at(self.schedule, v)?;
        Ok(&g * self.kappa + &m * (1.0 - self.kappa))
    }
}

/// Scalar metric from a closed-form evaluator; used where the metric is known
/// analytically (momentum-space chains) rather than through dense operators.
pub struct ScalarMetric<F: Fn(f64) -> f64 + Sync> {
    f: F,
}

impl<F: Fn(f64) -> f64 + Sync> ScalarMetric<F> {
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F: Fn(f64) -> f64 + Sync> Metric for ScalarMetric<F> {
    fn dims(&self) -> usize {
        1
    }

    fn eval(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        let g = (self.f)(v[0]);
        if !g.is_finite() {
            return Err(Error::domain(format!("non-finite metric at v = {}", v[0])));
        }
        Ok(DMatrix::from_element(1, 1, g))
    }
}

pub fn kubo_metric_at(schedule: &ControlSchedule, v: &[f64]) -> Result<DMatrix<f64>> {
    let state = schedule.gibbs_at(v)?;
    if state.clamped() {
        return Err(Error::DegenerateState(state.populations().min()));
    }
    let d = schedule.controls();
    let n = state.dim();
    let u = state.basis();
    let p = state.populations();
    let rotated: Vec<_> = schedule
        .basis_ops
        .iter()
        .map(|op| u.adjoint() * op.entries() * u)
        .collect();
    let means: Vec<f64> = rotated
        .iter()
        .map(|vb| (0..n).map(|a| p[a] * vb[(a, a)].re).sum())
        .collect();
    let mut g = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let lm = log_mean_raw(p[a], p[b]);
                    acc += lm * (rotated[i][(a, b)] * rotated[j][(b, a)]).re;
                }
            }
            let val = schedule.beta * (acc - means[i] * means[j]);
            g[(i, j)] = val;
            g[(j, i)] = val;
        }
    }
    Ok(g)
}

pub fn fluctuation_metric_at(schedule: &ControlSchedule, v: &[f64]) -> Result<DMatrix<f64>> {
    let state = schedule.gibbs_at(v)?;
    if state.clamped() {
        return Err(Error::DegenerateState(state.populations().min()));
    }
    let d = schedule.controls();
    let rho = state.density_matrix();
    let means: Vec<f64> = schedule
        .basis_ops
        .iter()
        .map(|op| (op.entries() * &rho).trace().re)
        .collect();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let vij = (schedule.basis_ops[i].entries() * schedule.basis_ops[j].entries() * &rho).trace();
            let vji = (schedule.basis_ops[j].entries() * schedule.basis_ops[i].entries() * &rho).trace();
            let val = schedule.beta * (0.5 * (vij.re + vji.re) - means[i] * means[j]);
            m[(i, j)] = val;
            m[(j, i)] = val;
        }
    }
    Ok(m)
}

/// Thermodynamic length L = ∫_0^1 sqrt(g_ij v̇^i v̇^j) dt by composite Simpson
/// with panels aligned to the path sampling grid.
pub fn path_length(path: &SampledPath, metric: &dyn Metric, resolution: usize) -> Result<f64> {
    if resolution < 16 {
        return Err(Error::domain("path_length needs resolution >= 16"));
    }
    let panels = resolution.max(path.resolution() - 1);
    let mut acc = 0.0;
    let mut prev = speed_at(path, metric, 0.0)?;
    for i in 0..panels {
        let t0 = i as f64 / panels as f64;
        let t1 = (i + 1) as f64 / panels as f64;
        let fm = speed_at(path, metric, 0.5 * (t0 + t1))?;
        let fb = speed_at(path, metric, t1)?;
        acc += (t1 - t0) / 6.0 * (prev + 4.0 * fm + fb);
        prev = fb;
    }
    Ok(acc)
}

fn speed_at(path: &SampledPath, metric: &dyn Metric, t: f64) -> Result<f64> {
    let v = path.value(t);
    let vdot = path.velocity(t);
    let s = metric.speed(&v, &vdot)?;
    if !s.is_finite() {
        return Err(Error::domain(format!("non-finite metric speed at t = {t}")));
    }
    Ok(s)
}

/// Cumulative arc length along `path` sampled at `grid + 1` uniform t values,
/// each interval integrated with Simpson.
fn cumulative_length(path: &SampledPath, metric: &dyn Metric, grid: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut s = Vec::with_capacity(grid + 1);
    let mut speeds = Vec::with_capacity(grid + 1);
    s.push(0.0);
    let mut prev = speed_at(path, metric, 0.0)?;
    speeds.push(prev);
    for i in 0..grid {
        let t0 = i as f64 / grid as f64;
        let t1 = (i + 1) as f64 / grid as f64;
        let fm = speed_at(path, metric, 0.5 * (t0 + t1))?;
        let fb = speed_at(path, metric, t1)?;
        s.push(s[i] + (t1 - t0) / 6.0 * (prev + 4.0 * fm + fb));
        speeds.push(fb);
        prev = fb;
    }
    Ok((s, speeds))
}

/// Inverts a cumulative-length table at `target`, returning the grid parameter
/// in [0, 1]. Local quadratic model of the integrand keeps the inversion
/// accurate well below the discretization tolerances.
fn invert_cumulative(s: &[f64], speeds: &[f64], target: f64) -> f64 {
    let grid = s.len() - 1;
    let total = s[grid];
    let target = target.clamp(0.0, total);
    // binary search for the bracketing interval
    let mut lo = 0usize;
    let mut hi = grid;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if s[mid] <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h = 1.0 / grid as f64;
    let ds = target - s[lo];
    let f0 = speeds[lo];
    let f1 = speeds[lo + 1];
    // solve f0 u + (f1 - f0) u^2 / 2 = ds/h for u in [0, 1]
    let a = 0.5 * (f1 - f0);
    let b = f0;
    let c = -ds / h;
    let u = if a.abs() < 1e-14 * b.abs().max(1e-300) {
        if b > 0.0 { -c / b } else { 0.0 }
    } else {
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        let r = (-b + disc) / (2.0 * a);
        if (0.0..=1.0).contains(&r) { r } else { (-b - disc) / (2.0 * a) }
    };
    (lo as f64 + u.clamp(0.0, 1.0)) * h
}

/// Constant-thermodynamic-speed reparametrization of a one-dimensional path:
/// the inverse of the cumulative arc-length map, with endpoints preserved.
pub fn geodesic(path: &SampledPath, metric: &dyn Metric, resolution: usize) -> Result<SampledPath> {
    if path.dims() != 1 {
        return Err(Error::Unsupported(
            "geodesic solving is implemented for one control dimension".into(),
        ));
    }
    let resolution = resolution.max(64);
    let grid = (4 * resolution).max(2048);
    let (v0, v1) = (path.start()[0], path.end()[0]);
    // straight-segment image: arc length accumulated in v
    let seg = SampledPath::linear(&[v0], &[v1], 2)?;
    let (s, speeds) = cumulative_length(&seg, metric, grid)?;
    let total = *s.last().unwrap();
    let scale = speeds.iter().cloned().fold(0.0f64, f64::max);
    if total <= 0.0 || scale <= 0.0 {
        return Err(Error::DegenerateGeodesic(v0, v1));
    }
    for i in 0..grid {
        if speeds[i] <= 1e-12 * scale && speeds[i + 1] <= 1e-12 * scale {
            let h = (v1 - v0) / grid as f64;
            return Err(Error::DegenerateGeodesic(v0 + i as f64 * h, v0 + (i + 1) as f64 * h));
        }
    }
    let mut samples = Vec::with_capacity(resolution);
    for i in 0..resolution {
        let t = i as f64 / (resolution - 1) as f64;
        let u = invert_cumulative(&s, &speeds, t * total);
        samples.push(v0 + u * (v1 - v0));
    }
    samples[0] = v0;
    *samples.last_mut().unwrap() = v1;
    Ok(SampledPath::from_uniform_samples(vec![samples]))
}

/// N+1 points along `path` whose per-step thermodynamic lengths equal L/N.
pub fn discretize_equal_length(
    path: &SampledPath,
    metric: &dyn Metric,
    n_steps: usize,
) -> Result<Vec<Vec<f64>>> {
    if n_steps == 0 {
        return Err(Error::domain("N must be at least 1"));
    }
    let grid = (8 * n_steps).max(2048);
    let (s, speeds) = cumulative_length(path, metric, grid)?;
    let total = *s.last().unwrap();
    if total <= 0.0 {
        return Err(Error::DegenerateGeodesic(0.0, 1.0));
    }
    let mut points = Vec::with_capacity(n_steps + 1);
    points.push(path.start());
    for n in 1..n_steps {
        let t = invert_cumulative(&s, &speeds, n as f64 * total / n_steps as f64);
        points.push(path.value(t));
    }
    points.push(path.end());
    Ok(points)
}
