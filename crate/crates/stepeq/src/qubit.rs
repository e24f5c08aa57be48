//! Polaron-dressed Landau-Zener qubit: bath-renormalised tunnelling γ(β),
//! the polaron Hamiltonian family H = (ω σ_z + Δγ σ_x)/2, and ramp schedules
//! over the splitting ω.
//!
//! The renormalisation constant is
//! γ(β) = exp(-2 ∫_0^∞ dω J(ω) coth(βω/2)/ω²) with the super-Ohmic spectral
//! density J(ω) = α e^{-ω/ω_C} ω³/ω_C², so γ ∈ (0, 1] and suppression grows
//! with temperature and coupling strength.

use crate::error::{Error, Result};
use crate::geometry::{geodesic, ControlSchedule, KuboMetric, SampledPath, DEFAULT_PATH_RESOLUTION};
use crate::operator::{C64, CMatrix, HermitianOperator};
use crate::quad::adaptive_simpson;

pub fn sigma_z() -> HermitianOperator {
    HermitianOperator::from_real(2, &[1.0, 0.0, 0.0, -1.0]).expect("sigma_z is Hermitian")
}

pub fn sigma_x() -> HermitianOperator {
    HermitianOperator::from_real(2, &[0.0, 1.0, 1.0, 0.0]).expect("sigma_x is Hermitian")
}

pub fn sigma_y() -> HermitianOperator {
    let m = CMatrix::from_row_slice(2, 2, &[
        C64::new(0.0, 0.0),
        C64::new(0.0, -1.0),
        C64::new(0.0, 1.0),
        C64::new(0.0, 0.0),
    ]);
    HermitianOperator::new(m).expect("sigma_y is Hermitian")
}

/// Which deterministic ramp the schedule follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Linear,
    Geodesic,
}

/// Two-level model with tunnelling Δ, ramp endpoints for the splitting ω,
/// bath coupling α, spectral cutoff ω_C, and inverse temperature β.
/// Energies are dimensionless in units of Δ.
#[derive(Debug, Clone)]
pub struct QubitModel {
    pub delta: f64,
    pub omega0: f64,
    pub omega1: f64,
    pub alpha: f64,
    pub omega_c: f64,
    pub beta: f64,
    gamma: f64,
}

impl QubitModel {
    pub fn new(delta: f64, omega0: f64, omega1: f64, alpha: f64, omega_c: f64, beta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain(format!("delta must be positive, got {delta}")));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::domain(format!("omega_c must be positive, got {omega_c}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be nonnegative, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        let gamma = gamma_renorm_raw(alpha, omega_c, beta)?;
        Ok(Self { delta, omega0, omega1, alpha, omega_c, beta, gamma })
    }

    /// Bare qubit (no bath): γ = 1.
    pub fn bare(delta: f64, omega0: f64, omega1: f64, beta: f64) -> Result<Self> {
        Self::new(delta, omega0, omega1, 0.0, 1.0, beta)
    }

    /// γ(β), computed once at construction and cached.
    pub fn gamma_renorm(&self) -> f64 {
        self.gamma
    }

    /// Renormalised tunnelling Δγ(β).
    pub fn dressed_gap(&self) -> f64 {
        self.delta * self.gamma
    }

    /// H^P(ω) = (ω σ_z + Δγ σ_x)/2.
    pub fn polaron_hamiltonian(&self, omega: f64) -> HermitianOperator {
        HermitianOperator::linear_combination(&[
            (0.5 * omega, &sigma_z()),
            (0.5 * self.dressed_gap(), &sigma_x()),
        ])
        .expect("polaron Hamiltonian is Hermitian")
    }

    /// One-control schedule over v = ω with V = σ_z/2 and the fixed
    /// Δγ σ_x/2 part exposed as the schedule's offset operator.
    pub fn schedule(&self, kind: PathKind, resolution: usize) -> Result<ControlSchedule> {
        if self.omega0 == self.omega1 {
            return Err(Error::domain("ramp endpoints must differ"));
        }
        let resolution = if resolution == 0 { DEFAULT_PATH_RESOLUTION } else { resolution };
        let v = HermitianOperator::linear_combination(&[(0.5, &sigma_z())]).unwrap();
        let offset =
            HermitianOperator::linear_combination(&[(0.5 * self.dressed_gap(), &sigma_x())]).unwrap();
        let path = SampledPath::linear(&[self.omega0], &[self.omega1], resolution)?;
        let schedule = ControlSchedule::new(vec![v], Some(offset), path, self.beta)?;
        match kind {
            PathKind::Linear => Ok(schedule),
            PathKind::Geodesic => {
                let metric = KuboMetric::new(&schedule);
                let geo = geodesic(&schedule.path, &metric, resolution)?;
                schedule.with_path(geo)
            }
        }
    }

    /// Convenience alias matching the protocol naming used in run configs.
    pub fn landau_zener_schedule(&self, kind: PathKind) -> Result<ControlSchedule> {
        self.schedule(kind, DEFAULT_PATH_RESOLUTION)
    }
}

/// γ(β) for given coupling and cutoff. The integrand
/// 2 J(ω) coth(βω/2)/ω² = (2α/ω_C²) ω e^{-ω/ω_C} coth(βω/2)
/// is finite at ω → 0 (limit 4α/(βω_C²)) and cut off exponentially; the
/// quadrature runs to 50 ω_C where the tail is below 1e-20 of the peak.
pub fn gamma_renorm_raw(alpha: f64, omega_c: f64, beta: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Ok(1.0);
    }
    let pref = 2.0 * alpha / (omega_c * omega_c);
    let f = |w: f64| {
        if w <= 0.0 {
            pref * 2.0 / beta
        } else {
            pref * w * (-w / omega_c).exp() / (0.5 * beta * w).tanh()
        }
    };
    // split at the coth crossover so the adaptive rule converges uniformly in beta
    let split = (2.0 / beta).min(50.0 * omega_c);
    let head = adaptive_simpson(f, 0.0, split, 1e-12 * pref.max(1.0))?;
    let tail = if split < 50.0 * omega_c {
        adaptive_simpson(f, split, 50.0 * omega_c, 1e-12 * pref.max(1.0))?
    } else {
        0.0
    };
    let integral = head + tail;
    if !integral.is_finite() {
        return Err(Error::Quadrature("gamma integral did not converge".into()));
    }
    Ok((-integral).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn gamma_is_one_without_coupling() {
        assert_eq!(gamma_renorm_raw(0.0, 1.0, 1.0).unwrap(), 1.0);
        let m = QubitModel::bare(1.0, -5.0, 5.0, 1.0).unwrap();
        assert_eq!(m.gamma_renorm(), 1.0);
    }

    #[test]
    fn gamma_monotone_in_temperature_and_coupling() {
        // more severe suppression at higher temperature (smaller beta)
        for alpha in [0.1, 0.5, 0.9] {
            let curve: Vec<f64> = [0.05, 0.2, 1.0, 5.0, 20.0]
                .iter()
                .map(|&beta| gamma_renorm_raw(alpha, 1.0, beta).unwrap())
                .collect();
            assert!(curve.windows(2).all(|w| w[0] < w[1]), "alpha = {alpha}: {curve:?}");
            assert!(curve.iter().all(|g| *g > 0.0 && *g <= 1.0));
        }
        // and at stronger coupling
        for beta in [0.2, 1.0, 5.0] {
            let curve: Vec<f64> = [0.05, 0.2, 0.5, 0.9]
                .iter()
                .map(|&alpha| gamma_renorm_raw(alpha, 1.0, beta).unwrap())
                .collect();
            assert!(curve.windows(2).all(|w| w[0] > w[1]), "beta = {beta}: {curve:?}");
        }
    }

    #[test]
    fn gamma_matches_trapezoid_oracle() {
        // independent high-resolution trapezoid evaluation
        let (alpha, beta, wc) = (0.5, 1.0, 1.0);
        let n = 400_000;
        let wmax = 50.0;
        let h = wmax / n as f64;
        let f = |w: f64| {
            if w == 0.0 {
                2.0 * alpha / wc / wc * 2.0 / beta
            } else {
                2.0 * alpha / wc / wc * w * (-w / wc).exp() / (0.5 * beta * w).tanh()
            }
        };
        let mut acc = 0.5 * (f(0.0) + f(wmax));
        for i in 1..n {
            acc += f(i as f64 * h);
        }
        let oracle = (-acc * h).exp();
        let got = gamma_renorm_raw(alpha, wc, beta).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-8);
    }

    #[test]
    fn gamma_large_beta_limit() {
        // coth -> 1: exponent -> 2 alpha ∫ w e^{-w} dw / wc^2 = 2 alpha
        let g = gamma_renorm_raw(0.5, 1.0, 1e4).unwrap();
        assert_relative_eq!(g, (-1.0f64).exp(), max_relative = 1e-3);
    }

    #[test]
    fn polaron_hamiltonian_spectrum() {
        let m = QubitModel::new(1.0, -5.0, 5.0, 0.5, 1.0, 1.0).unwrap();
        let a = m.dressed_gap();
        let h = m.polaron_hamiltonian(0.7);
        let expect = 0.5 * (0.7f64 * 0.7 + a * a).sqrt();
        let mut ev: Vec<f64> = h.eigenvalues().iter().cloned().collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_abs_diff_eq!(ev[0], -expect, epsilon = 1e-13);
        assert_abs_diff_eq!(ev[1], expect, epsilon = 1e-13);

        // alpha = 0 reduces to the bare Landau-Zener Hamiltonian
        let bare = QubitModel::bare(1.0, -5.0, 5.0, 1.0).unwrap();
        let hb = bare.polaron_hamiltonian(0.7);
        assert_abs_diff_eq!(hb.entries()[(0, 1)].re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn schedule_endpoints_and_offset() {
        let m = QubitModel::new(1.0, -5.0, 5.0, 0.5, 1.0, 1.0).unwrap();
        let s = m.schedule(PathKind::Linear, 256).unwrap();
        assert_eq!(s.path.start()[0], -5.0);
        assert_eq!(s.path.end()[0], 5.0);
        let h0 = s.hamiltonian_at(&[-5.0]).unwrap();
        let expect = m.polaron_hamiltonian(-5.0);
        assert!((h0.entries() - expect.entries()).iter().all(|z| z.norm() < 1e-14));
        assert!(QubitModel::new(1.0, 2.0, 2.0, 0.0, 1.0, 1.0)
            .unwrap()
            .schedule(PathKind::Linear, 64)
            .is_err());
    }

    #[test]
    fn symmetric_sweep_gives_odd_symmetric_geodesic() {
        // g(ω) is even in ω, so the geodesic is odd-symmetric about t = 1/2
        let m = QubitModel::new(1.0, -5.0, 5.0, 0.5, 1.0, 1.0).unwrap();
        let s = m.schedule(PathKind::Geodesic, 1024).unwrap();
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let a = s.path.value(t)[0];
            let b = s.path.value(1.0 - t)[0];
            assert_abs_diff_eq!(a, -b, epsilon = 2e-4);
        }
    }
}
