//! Transverse-field Ising chain in momentum space: mode grid, magnetisation,
//! dissipation kernels, the finite-size cumulant generating function, the
//! thermodynamic-limit dissipation integral, and a small-chain brute-force
//! oracle.
//!
//! The chain H(h) = -J Σ_j (σ^x_j σ^x_{j+1} + h σ^z_j) is fermionised with
//! anti-periodic boundary conditions (c_{j+L} = -c_j), giving independent
//! momentum modes k = 2π(m+1/2)/L with E_k = 2J(h - cos k), Ω_k = 2J sin k
//! and quasiparticle energy ε_k = J sqrt(h² + 1 - 2h cos k). The brute-force
//! oracle builds the same fermion Hamiltonian on the full 2^L space, so the
//! two routes agree exactly rather than asymptotically.
//!
//! The per-mode y-kernel is easy to get wrong by one hyperbolic factor: a
//! variant carrying a single sech(βε) looks plausible but its y-integral
//! misses the closed-form C(k,h) by cosh(βε_k). A dense 4×4 evaluation of
//! cov^y on the Bogoliubov block settles it: the correct kernel carries
//! sech², and its β-weighted y-integral reproduces C(k,h) exactly.
//! `kernel_cy` is that oracle-consistent form and is what every default path
//! uses; the rejected variant stays available as `kernel_cy_single_sech` so
//! the cross-check is reproducible.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::geometry::{geodesic, SampledPath, ScalarMetric, DEFAULT_PATH_RESOLUTION};
use crate::noise::PhiTensor;
use crate::operator::{
    gibbs_state, relative_entropy, C64, CMatrix, GibbsState, HermitianOperator,
};
use crate::predictor::{path_functionals, Prediction, StepOptimum};
use crate::quad::{adaptive_simpson, gauss_legendre};

/// Chain size: an even finite length or the thermodynamic limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainLength {
    Finite(usize),
    Infinite,
}

/// Per-mode dispersion data.
#[derive(Debug, Clone, Copy)]
pub struct ModeData {
    pub k: f64,
    pub e_k: f64,
    pub omega_k: f64,
    pub eps_k: f64,
}

/// Transverse-field Ising chain with coupling J, field ramp h0 → h1 and
/// inverse temperature β (both dimensionless in units of J).
#[derive(Debug, Clone)]
pub struct IsingModel {
    pub coupling: f64,
    pub length: ChainLength,
    pub h0: f64,
    pub h1: f64,
    pub beta: f64,
}

impl IsingModel {
    pub fn new(coupling: f64, length: ChainLength, h0: f64, h1: f64, beta: f64) -> Result<Self> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(Error::domain(format!("coupling must be positive, got {coupling}")));
        }
        if let ChainLength::Finite(l) = length {
            if l < 2 || l % 2 != 0 {
                return Err(Error::domain(format!("chain length must be even and >= 2, got {l}")));
            }
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { coupling, length, h0, h1, beta })
    }

    /// Momentum grid k = 2π(m + 1/2)/L, m = 0..L/2-1 (finite chains only).
    pub fn momentum_grid(&self) -> Result<Vec<f64>> {
        match self.length {
            ChainLength::Finite(l) => Ok((0..l / 2)
                .map(|m| 2.0 * std::f64::consts::PI * (m as f64 + 0.5) / l as f64)
                .collect()),
            ChainLength::Infinite => Err(Error::domain("momentum grid needs a finite chain")),
        }
    }

    pub fn mode_data(&self, k: f64, h: f64) -> ModeData {
        let j = self.coupling;
        ModeData {
            k,
            e_k: 2.0 * j * (h - k.cos()),
            omega_k: 2.0 * j * k.sin(),
            eps_k: j * (h * h + 1.0 - 2.0 * h * k.cos()).sqrt(),
        }
    }

    /// Thermal magnetisation per spin <σ_z> = (1/L) Σ_{k>0} (E_k/ε_k) tanh(βε_k),
    /// with (1/2π) ∫_0^π dk replacing the sum in the thermodynamic limit.
    pub fn magnetisation(&self, h: f64) -> f64 {
        let f = |k: f64| {
            let m = self.mode_data(k, h);
            if m.eps_k == 0.0 {
                0.0
            } else {
                m.e_k / m.eps_k * (self.beta * m.eps_k).tanh()
            }
        };
        match self.length {
            ChainLength::Finite(l) => {
                self.momentum_grid().unwrap().iter().map(|&k| f(k)).sum::<f64>() / l as f64
            }
            ChainLength::Infinite => k_integral(f) / (2.0 * std::f64::consts::PI),
        }
    }

    /// Consistent per-mode y-kernel: the exact cov^y of dH on one momentum
    /// mode, (J²/2ε²) sech²(βε) [E² + Ω² cosh(2βε(1-2y))], in the
    /// overflow-safe exponential form.
    pub fn kernel_cy(&self, k: f64, y: f64, h: f64) -> f64 {
        let m = self.mode_data(k, h);
        let j2 = self.coupling * self.coupling;
        let z = self.beta * m.eps_k;
        let denom = {
            let e = (-2.0 * z).exp();
            (1.0 + e) * (1.0 + e)
        };
        // sech²(z) = 4 e^{-2z}/(1+e^{-2z})²
        let sech2 = 4.0 * (-2.0 * z).exp() / denom;
        // sech²(z) cosh(2z(1-2y)) = 2 (e^{-4zy} + e^{-4z(1-y)})/(1+e^{-2z})²
        let cos_term = 2.0 * ((-4.0 * z * y).exp() + (-4.0 * z * (1.0 - y)).exp()) / denom;
        j2 / (2.0 * m.eps_k * m.eps_k) * (m.e_k * m.e_k * sech2 + m.omega_k * m.omega_k * cos_term)
    }

    /// The rejected kernel variant with a single sech(βε) factor: larger
    /// than `kernel_cy` by cosh(βε_k) and inconsistent with the dense cov^y
    /// oracle. Kept so the adjudication is reproducible; grows like e^{βε}
    /// and can overflow for βε ≳ 700 by construction.
    pub fn kernel_cy_single_sech(&self, k: f64, y: f64, h: f64) -> f64 {
        let m = self.mode_data(k, h);
        let j2 = self.coupling * self.coupling;
        let z = self.beta * m.eps_k;
        let denom = 1.0 + (-2.0 * z).exp();
        let sech = 2.0 * (-z).exp() / denom;
        // sech(z) cosh(2z(1-2y)) = (e^{z(1-4y)} + e^{-z(3-4y)})/(1+e^{-2z})
        let cos_term = ((z * (1.0 - 4.0 * y)).exp() + (-z * (3.0 - 4.0 * y)).exp()) / denom;
        j2 / (2.0 * m.eps_k * m.eps_k) * (m.e_k * m.e_k * sech + m.omega_k * m.omega_k * cos_term)
    }

    /// Closed-form dissipation kernel
    /// C(k,h) = 2βJ⁴/ε² (h - cos k)² sech²(βε) + 2J⁴/ε³ sin²k tanh(βε);
    /// equals β ∫_0^1 dy kernel_cy(k, y, h).
    pub fn kernel_c(&self, k: f64, h: f64) -> f64 {
        let m = self.mode_data(k, h);
        let j = self.coupling;
        let j4 = j * j * j * j;
        let z = self.beta * m.eps_k;
        let e = (-2.0 * z).exp();
        let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
        let hc = h - k.cos();
        let sk = k.sin();
        let eps2 = m.eps_k * m.eps_k;
        2.0 * self.beta * j4 / eps2 * hc * hc * sech2
            + 2.0 * j4 / (eps2 * m.eps_k) * sk * sk * z.tanh()
    }

    /// Per-site thermodynamic metric for the control h:
    /// (1/L) Σ_{k>0} C(k,h), or (1/2π) ∫_0^π C(k,h) dk for infinite chains.
    pub fn site_metric(&self, h: f64) -> f64 {
        match self.length {
            ChainLength::Finite(l) => {
                self.momentum_grid().unwrap().iter().map(|&k| self.kernel_c(k, h)).sum::<f64>()
                    / l as f64
            }
            ChainLength::Infinite => {
                k_integral(|k| self.kernel_c(k, h)) / (2.0 * std::f64::consts::PI)
            }
        }
    }

    /// The per-site metric as a geometry object.
    pub fn metric(&self) -> ScalarMetric<impl Fn(f64) -> f64 + Sync + '_> {
        ScalarMetric::new(move |h| self.site_metric(h))
    }

    /// Linear ramp h0 → h1.
    pub fn erasure_path(&self, resolution: usize) -> Result<SampledPath> {
        let r = if resolution == 0 { DEFAULT_PATH_RESOLUTION } else { resolution };
        SampledPath::linear(&[self.h0], &[self.h1], r)
    }

    /// Geodesic of the per-site metric between the ramp endpoints.
    pub fn geodesic_path(&self, resolution: usize) -> Result<SampledPath> {
        let metric = self.metric();
        geodesic(&self.erasure_path(resolution)?, &metric, resolution.max(64))
    }

    /// Continuous linear-response dissipation per site at step count N:
    /// 1/2 ∫ dt (ḣ²/N + N Φ_t) g_site(h_t).
    pub fn wdiss_linear(&self, n: usize, phi: &PhiTensor, path: &SampledPath) -> Result<Prediction> {
        if n == 0 {
            return Err(Error::domain("N must be at least 1"));
        }
        let metric = self.metric();
        let (a, b, l) = path_functionals(path, &metric, phi)?;
        let mut p = prediction_from_parts(n as f64, a / (2.0 * n as f64), 0.5 * n as f64 * b);
        p.length = Some(l);
        p.noise_integral = Some(b);
        Ok(p)
    }

    /// Discrete linear-response dissipation per site on explicit field values:
    /// 1/2 Σ_n (dh_n² + Φ_n) g_site(h_n). The first cumulant of `cgf`.
    pub fn wdiss_linear_discrete(&self, hs: &[f64], phi: &PhiTensor) -> Result<f64> {
        if hs.len() < 2 {
            return Err(Error::domain("need at least two field values"));
        }
        let mut acc = 0.0;
        for (n, pair) in hs.windows(2).enumerate() {
            let dh = pair[1] - pair[0];
            acc += 0.5 * (dh * dh + phi.at_step(n)[(0, 0)]) * self.site_metric(pair[0]);
        }
        Ok(acc)
    }

    /// Optimal step count and minimal per-site dissipation on the metric's
    /// geodesic: N_opt = L/sqrt(∫gΦ), W_opt = L·sqrt(∫gΦ).
    pub fn optimal_steps(&self, phi: &PhiTensor, resolution: usize) -> Result<(StepOptimum, SampledPath)> {
        let metric = self.metric();
        let path = self.erasure_path(resolution)?;
        let proto = crate::predictor::optimal_steps(&path, &metric, phi, resolution.max(64))?;
        Ok((proto.optimum, proto.geodesic))
    }

    /// Mode Hamiltonian on the 4-dim occupation basis
    /// {|1_k 1_-k>, |0 0>, |1 0>, |0 1>}: the even-parity block
    /// [[E, -iΩ], [iΩ, -E]] and a zero odd-parity block.
    pub fn mode_hamiltonian(&self, k: f64, h: f64) -> HermitianOperator {
        let m = self.mode_data(k, h);
        let mut mat = CMatrix::zeros(4, 4);
        mat[(0, 0)] = C64::new(m.e_k, 0.0);
        mat[(1, 1)] = C64::new(-m.e_k, 0.0);
        mat[(0, 1)] = C64::new(0.0, -m.omega_k);
        mat[(1, 0)] = C64::new(0.0, m.omega_k);
        HermitianOperator::new(mat).expect("mode Hamiltonian is Hermitian")
    }

    /// ∂H_k/∂h = 2J (n_k + n_-k - 1) = diag(2J, -2J, 0, 0).
    pub fn mode_dh(&self) -> HermitianOperator {
        let j = self.coupling;
        HermitianOperator::from_real(4, &[
            2.0 * j, 0.0, 0.0, 0.0,
            0.0, -2.0 * j, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        ])
        .unwrap()
    }

    /// Gibbs state of one momentum mode.
    pub fn mode_gibbs(&self, k: f64, h: f64) -> Result<GibbsState> {
        gibbs_state(&self.mode_hamiltonian(k, h), self.beta)
    }

    /// Exact dissipated work of a field chain via the momentum-space product
    /// structure: relative entropy is additive over modes. Returns the total
    /// for the whole chain (per-site = total / L).
    pub fn exact_wdiss_modes(&self, hs: &[f64]) -> Result<f64> {
        if hs.len() < 2 {
            return Err(Error::domain("need at least two field values"));
        }
        let grid = self.momentum_grid()?;
        let mut acc = 0.0;
        for &k in &grid {
            let states: Vec<GibbsState> =
                hs.iter().map(|&h| self.mode_gibbs(k, h)).collect::<Result<_>>()?;
            for pair in states.windows(2) {
                acc += relative_entropy(&pair[0], &pair[1])?;
            }
        }
        Ok(acc / self.beta)
    }

    /// Exact dissipated work of a field chain on the full 2^L space, built
    /// from Jordan-Wigner fermions with anti-periodic boundary conditions
    /// (c_{L+1} = -c_1). Total for the whole chain. L <= 8.
    pub fn bruteforce_wdiss(&self, hs: &[f64]) -> Result<f64> {
        let l = match self.length {
            ChainLength::Finite(l) if l <= 8 => l,
            ChainLength::Finite(l) => {
                return Err(Error::Resource(format!("brute force limited to L <= 8, got {l}")))
            }
            ChainLength::Infinite => {
                return Err(Error::domain("brute force needs a finite chain"))
            }
        };
        if hs.len() < 2 {
            return Err(Error::domain("need at least two field values"));
        }
        let states: Vec<GibbsState> = hs
            .iter()
            .map(|&h| gibbs_state(&self.bruteforce_hamiltonian(l, h), self.beta))
            .collect::<Result<_>>()?;
        let mut acc = 0.0;
        for pair in states.windows(2) {
            acc += relative_entropy(&pair[0], &pair[1])?;
        }
        Ok(acc / self.beta)
    }

    fn bruteforce_hamiltonian(&self, l: usize, h: f64) -> HermitianOperator {
        let j = self.coupling;
        let dim = 1usize << l;
        let cs = jordan_wigner_ops(l);
        let mut m = CMatrix::zeros(dim, dim);
        let id = CMatrix::identity(dim, dim);
        for site in 0..l {
            let next = (site + 1) % l;
            // anti-periodic fermions: the wrap-around operator carries a sign flip
            let sign = if site == l - 1 { -1.0 } else { 1.0 };
            let a = cs[site].adjoint() - &cs[site];
            let b = (&cs[next] + cs[next].adjoint()) * C64::new(sign, 0.0);
            m += a * b * C64::new(-j, 0.0);
            let n_op = cs[site].adjoint() * &cs[site];
            m += (&id - n_op * C64::new(2.0, 0.0)) * C64::new(-j * h, 0.0);
        }
        HermitianOperator::new(m).expect("fermion Hamiltonian is Hermitian")
    }

    /// Per-site finite-size CGF with the rescaled argument of the per-site
    /// distribution:
    /// K(λ) = -(β²/2L) Σ_n (dh_n² + Φ_n) ∫_0^λ dx ∫_{x/L}^{1-x/L} dy Σ_{k>0} C(k,y,h_n).
    pub fn cgf(&self, hs: &[f64], phi: &PhiTensor, lambda: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::domain(format!("lambda = {lambda} outside [0, 1]")));
        }
        self.cgf_unchecked(hs, phi, lambda)
    }

    fn cgf_unchecked(&self, hs: &[f64], phi: &PhiTensor, lambda: f64) -> Result<f64> {
        let l = match self.length {
            ChainLength::Finite(l) => l as f64,
            ChainLength::Infinite => {
                return Err(Error::domain("finite-size CGF needs a finite chain"))
            }
        };
        if hs.len() < 2 {
            return Err(Error::domain("need at least two field values"));
        }
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let grid = self.momentum_grid()?;
        let beta = self.beta;
        let mut acc = 0.0;
        for (n, pair) in hs.windows(2).enumerate() {
            let dh = pair[1] - pair[0];
            let weight = dh * dh + phi.at_step(n)[(0, 0)];
            if weight == 0.0 {
                continue;
            }
            let h = pair[0];
            let inner = |x: f64| {
                adaptive_simpson(
                    |y| grid.iter().map(|&k| self.kernel_cy(k, y, h)).sum::<f64>(),
                    x / l,
                    1.0 - x / l,
                    1e-12,
                )
                .unwrap_or(f64::NAN)
            };
            let (lo, hi, sign) = if lambda >= 0.0 { (0.0, lambda, 1.0) } else { (lambda, 0.0, -1.0) };
            let outer = adaptive_simpson(inner, lo, hi, 1e-11)?;
            if !outer.is_finite() {
                return Err(Error::Quadrature("finite-size CGF quadrature failed".into()));
            }
            acc -= 0.5 * beta * beta / l * weight * outer * sign;
        }
        Ok(acc)
    }

    /// First cumulant of the per-site CGF: the per-site mean dissipated work,
    /// -(1/β) dK/dλ at λ = 0.
    pub fn cgf_first_cumulant(&self, hs: &[f64], phi: &PhiTensor) -> Result<f64> {
        let k = |l: f64| self.cgf_unchecked(hs, phi, l);
        let d1 = crate::quad::central_derivative(&k, 1e-4)?;
        Ok(-d1 / self.beta)
    }
}

fn prediction_from_parts(n: f64, det: f64, stoch: f64) -> Prediction {
    Prediction {
        n,
        wdiss_det: det,
        wdiss_stoch: stoch,
        wdiss_total: det + stoch,
        length: None,
        noise_integral: None,
        variance: None,
        kappa: None,
    }
}

/// Jordan-Wigner fermion annihilation operators on the 2^L spin space:
/// c_j = (Π_{i<j} σ^z_i) ⊗ c ⊗ 1, with c annihilating the occupied state.
fn jordan_wigner_ops(l: usize) -> Vec<CMatrix> {
    let z = CMatrix::from_row_slice(2, 2, &[
        C64::new(1.0, 0.0), C64::new(0.0, 0.0),
        C64::new(0.0, 0.0), C64::new(-1.0, 0.0),
    ]);
    let c = CMatrix::from_row_slice(2, 2, &[
        C64::new(0.0, 0.0), C64::new(1.0, 0.0),
        C64::new(0.0, 0.0), C64::new(0.0, 0.0),
    ]);
    let id = CMatrix::identity(2, 2);
    (0..l)
        .map(|j| {
            let mut m = CMatrix::identity(1, 1);
            for i in 0..l {
                let factor = if i < j { &z } else if i == j { &c } else { &id };
                m = m.kronecker(factor);
            }
            m
        })
        .collect()
}

/// ∫_0^π f(k) dk by Gauss-Legendre with node doubling until the relative
/// change drops below 1e-10 (the integrands are smooth away from the k → 0,
/// h → 1 corner, which node doubling resolves).
fn k_integral<F: Fn(f64) -> f64>(f: F) -> f64 {
    let mut nodes = 512usize;
    let mut prev = k_integral_fixed(&f, nodes);
    loop {
        nodes *= 2;
        let next = k_integral_fixed(&f, nodes);
        let scale = next.abs().max(1e-300);
        if ((next - prev) / scale).abs() < 1e-10 || nodes >= 8192 {
            return next;
        }
        prev = next;
    }
}

fn k_integral_fixed<F: Fn(f64) -> f64>(f: &F, n: usize) -> f64 {
    let rule = gl_rule(n);
    let (nodes, weights) = rule.as_ref();
    let c = 0.5 * std::f64::consts::PI;
    let mut acc = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        acc += w * f(c * (x + 1.0));
    }
    c * acc
}

fn gl_rule(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n).or_insert_with(|| Arc::new(gauss_legendre(n))).clone()
}
