//! Trajectory-ensemble simulation: sample control-noise paths, build the
//! noisy quench chains, evaluate exact dissipation and two-point-measurement
//! work statistics, and aggregate with error bars.
//!
//! Noise is sample-and-hold: the value drawn at step n is frozen during the
//! subsequent equilibration, so the system thermalises with respect to
//! H_n + ξ_n^j V_j. Trajectories are independent work items; aggregation is a
//! pairwise ordered reduction over trajectory indices, so results are
//! bit-identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{discretize_equal_length, ControlSchedule, KuboMetric};
use crate::ising::{ChainLength, IsingModel};
use crate::noise::{sample_trajectory, NoiseModel};
use crate::operator::{
    hermitian_eigen, populations_from_energies, relative_entropy_spectral, CMatrix, C64,
    POPULATION_CLAMP,
};
use crate::predictor::tpms_moments_spectral;

/// Ensemble statistics for one protocol length.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub trajectories: usize,
    pub mean_wdiss: f64,
    /// across-trajectory variance of the per-trajectory dissipated work
    pub var_wdiss: f64,
    /// sqrt(var_wdiss / r)
    pub stderr: f64,
    /// average of the per-trajectory TPMS work variance, when gathered;
    /// a distinct statistic from `var_wdiss` and never conflated with it
    pub mean_tpms_variance: Option<f64>,
    pub seed: u64,
}

/// One evaluated noisy chain.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryOutcome {
    pub wdiss: f64,
    pub tpms_mean: f64,
    pub tpms_variance: f64,
}

/// A model that can price a noisy realization of its control chain.
pub trait TrajectoryModel: Sync {
    /// number of independent control indices
    fn controls(&self) -> usize;
    /// protocol length N (the chain has N+1 points)
    fn n_steps(&self) -> usize;
    /// deterministic control points, flat (N+1) x d row-major
    fn base_points(&self) -> &[f64];
    /// exact dissipation (and TPMS moments when requested) of a noisy chain
    fn evaluate(&self, points: &[f64], with_tpms: bool) -> Result<TrajectoryOutcome>;
}

/// Dense-operator chain: H_n = offset + Σ_j u_n^j V_j on a small Hilbert
/// space, with exact dissipation from the spectral relative-entropy chain.
pub struct DenseChainModel {
    ops: Vec<CMatrix>,
    offset: CMatrix,
    beta: f64,
    base: Vec<f64>,
    d: usize,
    /// per-site normalisation applied to reported work (1 for plain chains)
    site_scale: f64,
}

impl DenseChainModel {
    /// Builds the equal-thermodynamic-length discretization of the schedule's
    /// path at N steps and freezes it as the deterministic chain.
    pub fn from_schedule(schedule: &ControlSchedule, n: usize) -> Result<Self> {
        let metric = KuboMetric::new(schedule);
        let points = discretize_equal_length(&schedule.path, &metric, n)?;
        Self::from_points(schedule, &points)
    }

    /// Uses explicit control points as the deterministic chain.
    pub fn from_points(schedule: &ControlSchedule, points: &[Vec<f64>]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("chain needs at least two points"));
        }
        let d = schedule.controls();
        let dim = schedule.basis_ops[0].dim();
        let mut base = Vec::with_capacity(points.len() * d);
        for p in points {
            if p.len() != d {
                return Err(Error::DimensionMismatch(d, p.len()));
            }
            base.extend_from_slice(p);
        }
        let offset = match &schedule.offset {
            Some(op) => op.entries().clone(),
            None => CMatrix::zeros(dim, dim),
        };
        Ok(Self {
            ops: schedule.basis_ops.iter().map(|op| op.entries().clone()).collect(),
            offset,
            beta: schedule.beta,
            base,
            d,
            site_scale: 1.0,
        })
    }

    fn hamiltonian(&self, controls: &[f64]) -> CMatrix {
        let mut h = self.offset.clone();
        for (j, op) in self.ops.iter().enumerate() {
            h += op * C64::new(controls[j], 0.0);
        }
        h
    }
}

struct SpectralState {
    energies: Vec<f64>,
    basis: CMatrix,
    populations: Vec<f64>,
    log_z: f64,
}

fn spectral_state(h: &CMatrix, beta: f64) -> Result<SpectralState> {
    let (evals, basis) = hermitian_eigen(h);
    let energies: Vec<f64> = evals.iter().cloned().collect();
    let (populations, log_z, clamped) = populations_from_energies(&energies, beta);
    if clamped {
        return Err(Error::DegenerateState(POPULATION_CLAMP));
    }
    Ok(SpectralState { energies, basis, populations, log_z })
}

impl TrajectoryModel for DenseChainModel {
    fn controls(&self) -> usize {
        self.d
    }

    fn n_steps(&self) -> usize {
        self.base.len() / self.d - 1
    }

    fn base_points(&self) -> &[f64] {
        &self.base
    }

    fn evaluate(&self, points: &[f64], with_tpms: bool) -> Result<TrajectoryOutcome> {
        let steps = self.n_steps();
        let mut wdiss = 0.0;
        let mut tpms_mean = 0.0;
        let mut tpms_var = 0.0;
        let mut current = spectral_state(&self.hamiltonian(&points[0..self.d]), self.beta)?;
        for n in 0..steps {
            let ctrl = &points[(n + 1) * self.d..(n + 2) * self.d];
            let next = spectral_state(&self.hamiltonian(ctrl), self.beta)?;
            let overlap = current.basis.adjoint() * &next.basis;
            wdiss += relative_entropy_spectral(&current.populations, &next.populations, &overlap)
                / self.beta;
            if with_tpms {
                let (m, v) = tpms_moments_spectral(
                    &current.populations,
                    &current.energies,
                    &next.energies,
                    &overlap,
                    (next.log_z - current.log_z) / self.beta,
                );
                tpms_mean += m;
                tpms_var += v;
            }
            current = next;
        }
        Ok(TrajectoryOutcome {
            wdiss: wdiss * self.site_scale,
            tpms_mean: tpms_mean * self.site_scale,
            tpms_variance: tpms_var * self.site_scale * self.site_scale,
        })
    }
}

/// Finite Ising chain priced mode by mode on the 4-dim momentum blocks:
/// cost linear in L instead of 2^L. Reports dissipation per site.
pub struct IsingModeChainModel {
    model: IsingModel,
    grid: Vec<f64>,
    base: Vec<f64>,
    sites: f64,
}

impl IsingModeChainModel {
    pub fn new(model: &IsingModel, field_points: &[f64]) -> Result<Self> {
        let sites = match model.length {
            ChainLength::Finite(l) => l as f64,
            ChainLength::Infinite => {
                return Err(Error::domain("Monte Carlo needs a finite chain"))
            }
        };
        if field_points.len() < 2 {
            return Err(Error::domain("chain needs at least two points"));
        }
        Ok(Self {
            grid: model.momentum_grid()?,
            model: model.clone(),
            base: field_points.to_vec(),
            sites,
        })
    }

    /// Equal-length discretization of a field path at N steps.
    pub fn from_path(
        model: &IsingModel,
        path: &crate::geometry::SampledPath,
        n: usize,
    ) -> Result<Self> {
        let metric = model.metric();
        let points = discretize_equal_length(path, &metric, n)?;
        let fields: Vec<f64> = points.iter().map(|p| p[0]).collect();
        Self::new(model, &fields)
    }
}

impl TrajectoryModel for IsingModeChainModel {
    fn controls(&self) -> usize {
        1
    }

    fn n_steps(&self) -> usize {
        self.base.len() - 1
    }

    fn base_points(&self) -> &[f64] {
        &self.base
    }

    fn evaluate(&self, points: &[f64], with_tpms: bool) -> Result<TrajectoryOutcome> {
        let beta = self.model.beta;
        let mut wdiss = 0.0;
        let mut tpms_mean = 0.0;
        let mut tpms_var = 0.0;
        for &k in &self.grid {
            let mut current =
                spectral_state(self.model.mode_hamiltonian(k, points[0]).entries(), beta)?;
            for n in 0..self.n_steps() {
                let next = spectral_state(
                    self.model.mode_hamiltonian(k, points[n + 1]).entries(),
                    beta,
                )?;
                let overlap = current.basis.adjoint() * &next.basis;
                wdiss +=
                    relative_entropy_spectral(&current.populations, &next.populations, &overlap)
                        / beta;
                if with_tpms {
                    let (m, v) = tpms_moments_spectral(
                        &current.populations,
                        &current.energies,
                        &next.energies,
                        &overlap,
                        (next.log_z - current.log_z) / beta,
                    );
                    tpms_mean += m;
                    tpms_var += v;
                }
                current = next;
            }
        }
        Ok(TrajectoryOutcome {
            wdiss: wdiss / self.sites,
            tpms_mean: tpms_mean / self.sites,
            tpms_variance: tpms_var / (self.sites * self.sites),
        })
    }
}

/// Deterministic pairwise summation in index order.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

fn run(
    model: &dyn TrajectoryModel,
    noise: &NoiseModel,
    trajectories: usize,
    seed: u64,
    with_tpms: bool,
) -> Result<EnsembleStats> {
    if trajectories == 0 {
        return Err(Error::domain("need at least one trajectory"));
    }
    if noise.controls() != model.controls() {
        return Err(Error::DimensionMismatch(noise.controls(), model.controls()));
    }
    let n = model.n_steps();
    let d = model.controls();
    let base = model.base_points();

    // zero noise: one deterministic evaluation, repeated statistics
    if noise.is_zero() {
        let outcome = model.evaluate(base, with_tpms)?;
        return Ok(EnsembleStats {
            n,
            trajectories,
            mean_wdiss: outcome.wdiss,
            var_wdiss: 0.0,
            stderr: 0.0,
            mean_tpms_variance: with_tpms.then_some(outcome.tpms_variance),
            seed,
        });
    }

    let outcomes: Vec<Result<TrajectoryOutcome>> = (0..trajectories)
        .into_par_iter()
        .map(|i| {
            let traj = sample_trajectory(noise, n, seed, i as u64)?;
            let mut points = base.to_vec();
            for j in 0..d {
                let xi = traj.control(j);
                for (step, x) in xi.iter().enumerate() {
                    points[step * d + j] += x;
                }
            }
            model.evaluate(&points, with_tpms)
        })
        .collect();

    let mut wdiss = Vec::with_capacity(trajectories);
    let mut tpms_vars = Vec::with_capacity(if with_tpms { trajectories } else { 0 });
    for (i, o) in outcomes.into_iter().enumerate() {
        // a failed trajectory aborts the ensemble: dropping it would bias the stats
        let o = o.map_err(|e| Error::domain(format!("trajectory {i} failed: {e}")))?;
        wdiss.push(o.wdiss);
        if with_tpms {
            tpms_vars.push(o.tpms_variance);
        }
    }
    let r = trajectories as f64;
    let mean = pairwise_sum(&wdiss) / r;
    let sq: Vec<f64> = wdiss.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = if trajectories > 1 { pairwise_sum(&sq) / (r - 1.0) } else { 0.0 };
    Ok(EnsembleStats {
        n,
        trajectories,
        mean_wdiss: mean,
        var_wdiss: var,
        stderr: (var / r).sqrt(),
        mean_tpms_variance: with_tpms.then(|| pairwise_sum(&tpms_vars) / r),
        seed,
    })
}

/// Samples `trajectories` noise paths, prices the noisy chains, and
/// aggregates mean, variance and standard error of the dissipated work.
pub fn run_ensemble(
    model: &dyn TrajectoryModel,
    noise: &NoiseModel,
    trajectories: usize,
    seed: u64,
) -> Result<EnsembleStats> {
    run(model, noise, trajectories, seed, false)
}

/// As `run_ensemble`, additionally accumulating per-step two-point-measurement
/// work variances along each trajectory (steps are independent, so variances
/// add); their ensemble average is the statistic compared against the
/// fluctuation-metric prediction.
pub fn run_tpms_ensemble(
    model: &dyn TrajectoryModel,
    noise: &NoiseModel,
    trajectories: usize,
    seed: u64,
) -> Result<EnsembleStats> {
    run(model, noise, trajectories, seed, true)
}

/// One row of an N-sweep: ensemble statistics next to the predictions.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    pub stats: EnsembleStats,
    pub prediction: crate::predictor::Prediction,
    pub lr_variance: Option<f64>,
    /// |mc - prediction| <= 3 stderr
    pub within_band: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// N with the smallest Monte Carlo mean dissipation
    pub empirical_argmin: usize,
}

/// Runs one ensemble per grid N. `make` supplies the trajectory model and the
/// linear-response prediction (plus optional variance prediction) for each N.
pub fn sweep_n(
    make: &(dyn Fn(usize) -> Result<(Box<dyn TrajectoryModel>, crate::predictor::Prediction, Option<f64>)>
          + Sync),
    noise: &NoiseModel,
    n_grid: &[usize],
    trajectories: usize,
    seed: u64,
    with_tpms: bool,
) -> Result<SweepResult> {
    if n_grid.is_empty() {
        return Err(Error::domain("empty N grid"));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let (model, prediction, lr_variance) = make(n)?;
        let stats = run(model.as_ref(), noise, trajectories, seed, with_tpms)?;
        let within_band =
            (stats.mean_wdiss - prediction.wdiss_total).abs() <= 3.0 * stats.stderr;
        rows.push(SweepRow { stats, prediction, lr_variance, within_band });
    }
    let empirical_argmin = rows
        .iter()
        .min_by(|a, b| a.stats.mean_wdiss.partial_cmp(&b.stats.mean_wdiss).unwrap())
        .map(|row| row.stats.n)
        .unwrap();
    Ok(SweepResult { rows, empirical_argmin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseKind, NoiseProcess};
    use crate::predictor::{exact_wdiss, lr_wdiss_continuous, lr_variance, StepSequence};
    use crate::testutil::lz_schedule;
    use approx::assert_abs_diff_eq;

    fn geo_schedule(a: f64, beta: f64) -> ControlSchedule {
        let sched = lz_schedule(a, beta, -5.0, 5.0, 512);
        let metric = KuboMetric::new(&sched);
        let geo = crate::geometry::geodesic(&sched.path, &metric, 1024).unwrap();
        sched.with_path(geo).unwrap()
    }

    fn gwn(sigma: f64) -> NoiseModel {
        NoiseModel::single(NoiseProcess::new(NoiseKind::Gwn, sigma).unwrap())
    }

    #[test]
    fn zero_noise_reproduces_exact_wdiss_bit_for_bit() {
        let sched = geo_schedule(0.101280, 1.0);
        let model = DenseChainModel::from_schedule(&sched, 16).unwrap();
        let stats = run_ensemble(&model, &NoiseModel::none(1), 7, 42).unwrap();
        let points: Vec<Vec<f64>> = model.base_points().iter().map(|&x| vec![x]).collect();
        let seq = StepSequence::from_schedule_points(&sched, &points).unwrap();
        let exact = exact_wdiss(&seq).unwrap();
        assert_eq!(stats.mean_wdiss, exact);
        assert_eq!(stats.var_wdiss, 0.0);
        assert_eq!(stats.stderr, 0.0);
    }

    #[test]
    fn ensembles_are_deterministic_across_thread_counts() {
        let sched = geo_schedule(0.101280, 1.0);
        let model = DenseChainModel::from_schedule(&sched, 8).unwrap();
        let noise = gwn(0.05);
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_ensemble(&model, &noise, 64, 7).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        assert_eq!(a.mean_wdiss.to_bits(), b.mean_wdiss.to_bits());
        assert_eq!(a.var_wdiss.to_bits(), b.var_wdiss.to_bits());
    }

    #[test]
    fn per_trajectory_dissipation_is_nonnegative() {
        let sched = geo_schedule(0.101280, 1.0);
        let model = DenseChainModel::from_schedule(&sched, 12).unwrap();
        let noise = gwn(0.05);
        for i in 0..50 {
            let traj = sample_trajectory(&noise, 12, 99, i).unwrap();
            let mut pts = model.base_points().to_vec();
            for (s, x) in traj.control(0).iter().enumerate() {
                pts[s] += x;
            }
            let o = model.evaluate(&pts, false).unwrap();
            assert!(o.wdiss >= -1e-12);
        }
    }

    #[test]
    fn stderr_scales_inverse_sqrt_r() {
        let sched = geo_schedule(0.101280, 1.0);
        let model = DenseChainModel::from_schedule(&sched, 16).unwrap();
        let noise = gwn(0.05);
        let small = run_ensemble(&model, &noise, 125, 3).unwrap();
        let large = run_ensemble(&model, &noise, 2000, 3).unwrap();
        let ratio = small.stderr / large.stderr;
        assert!((ratio - 4.0).abs() < 0.8, "stderr ratio {ratio}");
    }

    #[test]
    fn mc_mean_tracks_lr_prediction_at_moderate_n() {
        let sched = geo_schedule(0.101280, 1.0);
        let noise = gwn(0.05);
        let phi = noise.phi_tensor(64).unwrap();
        let model = DenseChainModel::from_schedule(&sched, 64).unwrap();
        let stats = run_ensemble(&model, &noise, 600, 2024).unwrap();
        let pred = lr_wdiss_continuous(&sched, 64, &phi).unwrap();
        let gap = (stats.mean_wdiss - pred.wdiss_total).abs();
        assert!(gap < 4.0 * stats.stderr, "gap {gap} vs stderr {}", stats.stderr);
    }

    #[test]
    fn weak_noise_excess_scales_with_sigma_squared() {
        let sched = geo_schedule(0.101280, 1.0);
        let n = 64;
        let model = DenseChainModel::from_schedule(&sched, n).unwrap();
        let det = run_ensemble(&model, &NoiseModel::none(1), 1, 1).unwrap().mean_wdiss;
        let excess = |sigma: f64| {
            run_ensemble(&model, &gwn(sigma), 8000, 11).unwrap().mean_wdiss - det
        };
        let e1 = excess(0.05);
        let e2 = excess(0.025);
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.4, "quartering ratio {ratio}");
    }

    #[test]
    fn tpms_commuting_limit_and_quantum_friction() {
        // Delta = 0: classical commuting limit, beta/2 * variance = dissipation.
        // N = 64 keeps the third-order step remainder below the 3-stderr band.
        let sched = geo_schedule(0.0, 1.0);
        let noise = gwn(0.05);
        let model = DenseChainModel::from_schedule(&sched, 64).unwrap();
        let stats = run_tpms_ensemble(&model, &noise, 400, 5).unwrap();
        let var = stats.mean_tpms_variance.unwrap();
        let lhs = 0.5 * 1.0 * var;
        assert!(
            (lhs - stats.mean_wdiss).abs() < 3.0 * stats.stderr,
            "beta/2 var = {lhs} vs wdiss = {}",
            stats.mean_wdiss
        );

        // Delta = 1: quantum friction makes beta/2 * variance exceed dissipation
        let schedq = geo_schedule(1.0, 1.0);
        let modelq = DenseChainModel::from_schedule(&schedq, 64).unwrap();
        let statsq = run_tpms_ensemble(&modelq, &noise, 400, 5).unwrap();
        let lhsq = 0.5 * statsq.mean_tpms_variance.unwrap();
        assert!(lhsq > statsq.mean_wdiss * 1.05, "{lhsq} vs {}", statsq.mean_wdiss);

        // zero noise, large N: TPMS variance approaches the m-metric prediction
        let model_det = DenseChainModel::from_schedule(&schedq, 256).unwrap();
        let det = run_tpms_ensemble(&model_det, &NoiseModel::none(1), 1, 1).unwrap();
        let predicted = lr_variance(&schedq, 256, &crate::noise::PhiTensor::zero(1)).unwrap();
        let got = det.mean_tpms_variance.unwrap();
        assert!(
            (got - predicted).abs() / predicted < 0.02,
            "variance {got} vs prediction {predicted}"
        );
    }

    #[test]
    fn ising_mode_chain_matches_momentum_route() {
        let model =
            IsingModel::new(1.0, ChainLength::Finite(4), 0.0, 2.0, 1.3).unwrap();
        let fields: Vec<f64> = (0..=5).map(|i| 0.4 * i as f64).collect();
        let chain = IsingModeChainModel::new(&model, &fields).unwrap();
        let o = chain.evaluate(&fields, false).unwrap();
        let expect = model.exact_wdiss_modes(&fields).unwrap() / 4.0;
        assert_abs_diff_eq!(o.wdiss, expect, epsilon = 1e-12);
    }

    #[test]
    fn ising_mode_chain_tpms_matches_distribution_sums() {
        let model = IsingModel::new(1.0, ChainLength::Finite(6), 0.0, 2.0, 1.1).unwrap();
        let fields: Vec<f64> = (0..=4).map(|i| 0.5 * i as f64).collect();
        let chain = IsingModeChainModel::new(&model, &fields).unwrap();
        let stats = run_tpms_ensemble(&chain, &NoiseModel::none(1), 1, 1).unwrap();

        // oracle: per-mode, per-step two-point-measurement variances add
        let mut var = 0.0;
        for &k in &model.momentum_grid().unwrap() {
            for pair in fields.windows(2) {
                let h0 = model.mode_hamiltonian(k, pair[0]);
                let h1 = model.mode_hamiltonian(k, pair[1]);
                let pi0 = crate::operator::gibbs_state(&h0, model.beta).unwrap();
                var += crate::predictor::tpms_distribution(&pi0, &h0, &h1).unwrap().variance;
            }
        }
        let per_site = var / 36.0; // variance of the per-site total: L = 6
        assert_abs_diff_eq!(stats.mean_tpms_variance.unwrap(), per_site, epsilon = 1e-12);
        assert_abs_diff_eq!(
            stats.mean_wdiss,
            model.exact_wdiss_modes(&fields).unwrap() / 6.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn failed_trajectory_aborts_ensemble() {
        // deep freeze: populations clamp once the noisy splitting gets large,
        // and the ensemble must refuse rather than silently drop trajectories
        let sched = lz_schedule(0.101280, 800.0, -5.0, 5.0, 128);
        let points: Vec<Vec<f64>> = (0..=4).map(|i| vec![-5.0 + 2.5 * i as f64]).collect();
        let model = DenseChainModel::from_points(&sched, &points).unwrap();
        let err = run_ensemble(&model, &gwn(0.05), 8, 3).unwrap_err();
        assert!(err.to_string().contains("trajectory"), "unexpected error: {err}");
    }

    #[test]
    fn sweep_reports_argmin_and_bands() {
        let sched = geo_schedule(0.101280, 1.0);
        let noise = gwn(0.05);
        let grid = [32usize, 64, 128, 256, 512];
        let result = sweep_n(
            &|n| {
                let model = DenseChainModel::from_schedule(&sched, n)?;
                let phi = noise.phi_tensor(n)?;
                let pred = lr_wdiss_continuous(&sched, n, &phi)?;
                Ok((Box::new(model) as Box<dyn TrajectoryModel>, pred, None))
            },
            &noise,
            &grid,
            200,
            77,
            false,
        )
        .unwrap();
        assert_eq!(result.rows.len(), grid.len());
        // n_opt ~ 107 for these parameters: the argmin lands on 64 or 128
        assert!(
            result.empirical_argmin == 64 || result.empirical_argmin == 128,
            "argmin {}",
            result.empirical_argmin
        );
    }
}
