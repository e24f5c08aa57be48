//! Discrete classical control-noise processes (GWN, Wiener, AR(1), AR(n))
//! and their increment-variance functions Φ.
//!
//! Every process is built from independent Gaussian increments with standard
//! deviation `sigma_eta`. Trajectories are reproducible: the stream for a
//! given (master seed, trajectory index, control index) is fixed, so ensembles
//! are bit-identical regardless of thread count or evaluation order.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Rule generating the AR(n) response coefficients φ_m for m ≥ 1.
#[derive(Debug, Clone, PartialEq)]
pub enum ArRule {
    /// Exponentially decaying memory starting at the given amplitude:
    /// φ_1 = amplitude, φ_m = amplitude · e^{-decay (m-1)}. The total memory
    /// weight is amplitude/(1 - e^{-decay}); exceeding 1 makes the process
    /// unstable. The reference amplitude 0.642 at decay 1 sits 1.6% above
    /// that threshold, which is what produces an increment variance that
    /// plateaus and then slowly diverges.
    Exponential { amplitude: f64, decay: f64 },
    /// Explicit φ_1..φ_p; zero beyond the listed order.
    Explicit(Vec<f64>),
}

impl ArRule {
    pub fn phi(&self, m: usize) -> f64 {
        match self {
            ArRule::Exponential { amplitude, decay } => {
                amplitude * (-decay * (m as f64 - 1.0)).exp()
            }
            ArRule::Explicit(v) => v.get(m - 1).copied().unwrap_or(0.0),
        }
    }
}

/// Process family for one control index.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    None,
    Gwn,
    Wiener,
    /// AR(1) with response φ in [0, 1]; φ = 0 is GWN, φ = 1 is Wiener.
    Ar1(f64),
    /// Full-memory autoregressive process, order growing with the step index.
    ArN(ArRule),
}

/// A single control's noise process: family plus increment scale.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProcess {
    pub kind: NoiseKind,
    pub sigma_eta: f64,
}

impl NoiseProcess {
    pub fn new(kind: NoiseKind, sigma_eta: f64) -> Result<Self> {
        if !(sigma_eta.is_finite() && sigma_eta >= 0.0) {
            return Err(Error::domain(format!("sigma_eta must be >= 0, got {sigma_eta}")));
        }
        if let NoiseKind::Ar1(phi) = kind {
            if !(0.0..=1.0).contains(&phi) {
                return Err(Error::UnstableNoise(format!("AR(1) response phi = {phi} outside [0, 1]")));
            }
        }
        Ok(Self { kind, sigma_eta })
    }

    pub fn none() -> Self {
        Self { kind: NoiseKind::None, sigma_eta: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NoiseKind::None) || self.sigma_eta == 0.0
    }

    /// Analytic increment variance Φ_n = Var(ξ_{n+1} - ξ_n).
    ///
    /// GWN: 2σ²; Wiener: σ²; AR(1) with stationary initialization:
    /// σ²[(φ-1)²/(1-φ²) + 1] at every n; AR(n): σ² Σ_{m=0}^{n} (h_m - h_{m-1})².
    pub fn increment_variance(&self, n: usize) -> f64 {
        let s2 = self.sigma_eta * self.sigma_eta;
        match &self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Gwn => 2.0 * s2,
            NoiseKind::Wiener => s2,
            NoiseKind::Ar1(phi) => {
                if *phi >= 1.0 {
                    s2
                } else {
                    s2 * ((phi - 1.0) * (phi - 1.0) / (1.0 - phi * phi) + 1.0)
                }
            }
            NoiseKind::ArN(rule) => {
                let h = influence_coeffs(rule, n);
                let mut acc = 0.0;
                let mut prev = 0.0; // h_{-1}
                for hm in h {
                    let d = hm - prev;
                    acc += d * d;
                    prev = hm;
                }
                s2 * acc
            }
        }
    }
}

/// Influence-response coefficients h_0..h_{n_max} for an AR(n) rule:
/// h_{-1} = 0, h_0 = 1, h_n = Σ_{i=1}^{n} φ_i h_{n-i}.
pub fn influence_coeffs(rule: &ArRule, n_max: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(n_max + 1);
    h.push(1.0);
    for n in 1..=n_max {
        let mut acc = 0.0;
        for i in 1..=n {
            acc += rule.phi(i) * h[n - i];
        }
        h.push(acc);
    }
    h
}

/// Independent noise sources, one per control index.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    processes: Vec<NoiseProcess>,
}

impl NoiseModel {
    pub fn new(processes: Vec<NoiseProcess>) -> Result<Self> {
        if processes.is_empty() {
            return Err(Error::domain("noise model needs at least one control"));
        }
        Ok(Self { processes })
    }

    pub fn single(process: NoiseProcess) -> Self {
        Self { processes: vec![process] }
    }

    pub fn none(controls: usize) -> Self {
        Self { processes: vec![NoiseProcess::none(); controls.max(1)] }
    }

    pub fn controls(&self) -> usize {
        self.processes.len()
    }

    pub fn process(&self, control: usize) -> &NoiseProcess {
        &self.processes[control]
    }

    pub fn is_zero(&self) -> bool {
        self.processes.iter().all(NoiseProcess::is_zero)
    }

    /// Φ at step n as a d×d tensor. Cross-control correlations are not
    /// modeled, so the matrix is diagonal; the full-matrix shape is the API.
    pub fn phi_matrix(&self, n: usize) -> DMatrix<f64> {
        let d = self.controls();
        DMatrix::from_fn(d, d, |r, c| {
            if r == c {
                self.processes[r].increment_variance(n)
            } else {
                0.0
            }
        })
    }

    /// Piecewise-constant Φ_t over an N-step protocol:
    /// Φ_t = Φ_n for t in [n/N, (n+1)/N).
    pub fn phi_tensor(&self, n_steps: usize) -> Result<PhiTensor> {
        if n_steps == 0 {
            return Err(Error::domain("N must be at least 1"));
        }
        let steps = (0..n_steps).map(|n| self.phi_matrix(n)).collect();
        Ok(PhiTensor { steps })
    }
}

/// Per-step increment-variance tensors with the piecewise-constant time
/// interpolation used by the continuous-time formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTensor {
    steps: Vec<DMatrix<f64>>,
}

impl PhiTensor {
    pub fn constant(phi: DMatrix<f64>) -> Self {
        Self { steps: vec![phi] }
    }

    pub fn constant_scalar(phi: f64) -> Self {
        Self::constant(DMatrix::from_element(1, 1, phi))
    }

    pub fn zero(controls: usize) -> Self {
        Self::constant(DMatrix::zeros(controls, controls))
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn controls(&self) -> usize {
        self.steps[0].nrows()
    }

    pub fn at_step(&self, n: usize) -> &DMatrix<f64> {
        &self.steps[n.min(self.steps.len() - 1)]
    }

    pub fn at_time(&self, t: f64) -> &DMatrix<f64> {
        let n = ((t.clamp(0.0, 1.0)) * self.steps.len() as f64).floor() as usize;
        self.at_step(n)
    }

    pub fn is_zero(&self) -> bool {
        self.steps.iter().all(|m| m.iter().all(|&x| x == 0.0))
    }

    /// max over steps of the largest diagonal entry; a cheap scale estimate.
    pub fn max_scale(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|m| m.iter().cloned())
            .fold(0.0f64, f64::max)
    }
}

/// One sampled noise path ξ_0..ξ_N for every control index.
#[derive(Debug, Clone)]
pub struct NoiseTrajectory {
    /// values[control][n], n = 0..=N
    values: Vec<Vec<f64>>,
    seed: u64,
    index: u64,
}

impl NoiseTrajectory {
    pub fn control(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic substream for (master seed, trajectory index, control index).
pub(crate) fn substream_rng(seed: u64, index: u64, control: u64) -> ChaCha8Rng {
    let mut state = seed;
    let a = splitmix64(&mut state);
    state ^= index.wrapping_mul(0xA24B_AED4_963E_E407);
    let b = splitmix64(&mut state);
    state ^= control.wrapping_mul(0x9FB2_1C65_1E98_DF25);
    let c = splitmix64(&mut state);
    let d = splitmix64(&mut state);
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&a.to_le_bytes());
    key[8..16].copy_from_slice(&b.to_le_bytes());
    key[16..24].copy_from_slice(&c.to_le_bytes());
    key[24..32].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Samples ξ_0..ξ_N for every control of `model`.
///
/// Initial values: GWN draws ξ_0 from N(0, σ²); Wiener and AR(n) start at 0;
/// AR(1) draws from the stationary law N(0, σ²/(1-φ²)) for φ < 1 and falls
/// back to the Wiener initialization at φ = 1. These choices make the
/// analytic Φ_n hold at every step index including n = 0.
pub fn sample_trajectory(model: &NoiseModel, n_steps: usize, seed: u64, index: u64) -> Result<NoiseTrajectory> {
    if n_steps == 0 {
        return Err(Error::domain("N must be at least 1"));
    }
    let mut values = Vec::with_capacity(model.controls());
    for (j, proc_) in model.processes.iter().enumerate() {
        let mut rng = substream_rng(seed, index, j as u64);
        values.push(sample_one(proc_, n_steps, &mut rng));
    }
    Ok(NoiseTrajectory { values, seed, index })
}

fn sample_one(process: &NoiseProcess, n_steps: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sigma = process.sigma_eta;
    let mut xi = Vec::with_capacity(n_steps + 1);
    if process.is_zero() {
        return vec![0.0; n_steps + 1];
    }
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        sigma * z
    };
    match &process.kind {
        NoiseKind::None => unreachable!(),
        NoiseKind::Gwn => {
            for _ in 0..=n_steps {
                xi.push(draw(rng));
            }
        }
        NoiseKind::Wiener => {
            xi.push(0.0);
            for n in 0..n_steps {
                let step = draw(rng);
                xi.push(xi[n] + step);
            }
        }
        NoiseKind::Ar1(phi) => {
            if *phi >= 1.0 {
                xi.push(0.0);
            } else {
                let stationary = sigma / (1.0 - phi * phi).sqrt();
                let z: f64 = rng.sample(StandardNormal);
                xi.push(stationary * z);
            }
            for n in 0..n_steps {
                xi.push(phi * xi[n] + draw(rng));
            }
        }
        NoiseKind::ArN(rule) => {
            xi.push(0.0);
            for n in 0..n_steps {
                let mut acc = 0.0;
                for i in 1..=n {
                    acc += rule.phi(i) * xi[n + 1 - i];
                }
                xi.push(acc + draw(rng));
            }
        }
    }
    xi
}

/// Sample variance of the increment Δξ_n = ξ_{n+1} - ξ_n over independent
/// trajectories; validates the analytic Φ against the sampler.
pub fn empirical_increment_variance(
    process: &NoiseProcess,
    n_steps: usize,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if n >= n_steps {
        return Err(Error::domain(format!("step index {n} out of range for N = {n_steps}")));
    }
    if trials < 1000 {
        return Err(Error::domain("need at least 1000 trials"));
    }
    let model = NoiseModel::single(process.clone());
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for t in 0..trials {
        let traj = sample_trajectory(&model, n_steps, seed, t as u64)?;
        let xs = traj.control(0);
        let d = xs[n + 1] - xs[n];
        sum += d;
        sumsq += d * d;
    }
    let r = trials as f64;
    Ok((sumsq - sum * sum / r) / (r - 1.0))
}
