//! Batch command implementations behind the CLI verbs: predict, simulate,
//! geodesic, ising, noise-check. Each command reads a `RunConfig`, writes CSV
//! or JSON tables plus a JSON manifest into the output directory, and never
//! leaves partial files behind.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::config::{ModelConfig, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::{geodesic, ControlSchedule, KuboMetric, Metric, SampledPath};
use crate::ising::{ChainLength, IsingModel};
use crate::montecarlo::{sweep_n, DenseChainModel, IsingModeChainModel, TrajectoryModel};
use crate::noise::{empirical_increment_variance, NoiseModel, PhiTensor};
use crate::predictor::{
    kappa_cost, lr_variance, lr_wdiss_continuous, optimal_steps, StepOptimum,
};
use crate::qubit::PathKind;
use crate::report::{write_json, Cell, OutputFormat, Table};

/// Subcommands of the `ising` verb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsingCommand {
    Magnetisation,
    Wdiss,
    OracleCheck,
}

fn manifest(
    command: &str,
    cfg: &RunConfig,
    out_dir: &Path,
    outputs: &[PathBuf],
    extra: serde_json::Value,
) -> Result<PathBuf> {
    let config_text = cfg.canonical();
    let hash = hex_digest(config_text.as_bytes());
    let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    let value = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config_text,
        "config_sha256": hash,
        "seed": cfg.run.seed,
        "unix_time": now.as_secs(),
        "outputs": outputs.iter().map(|p| p.file_name().unwrap().to_string_lossy().to_string()).collect::<Vec<_>>(),
        "details": extra,
    });
    let path = out_dir.join("manifest.json");
    write_json(&path, &value)?;
    Ok(path)
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn optimum_json(opt: &StepOptimum) -> serde_json::Value {
    match opt {
        StepOptimum::Finite { n_real, w_opt, floor, ceil, recommended } => serde_json::json!({
            "n_opt_real": n_real,
            "n_opt_int": recommended,
            "w_opt": w_opt,
            "floor": {"n": floor.0, "wdiss": floor.1},
            "ceil": {"n": ceil.0, "wdiss": ceil.1},
        }),
        StepOptimum::Unbounded => serde_json::json!({
            "n_opt_real": serde_json::Value::Null,
            "n_opt": "unbounded (quasi-static)",
        }),
    }
}

/// The schedule a qubit config describes, geodesic-reparametrized on request.
fn qubit_schedule(cfg: &RunConfig) -> Result<ControlSchedule> {
    let model = cfg.model.qubit_model()?;
    model.schedule(cfg.protocol.path, cfg.protocol.resolution)
}

/// The field path an ising config describes.
fn ising_path(model: &IsingModel, cfg: &RunConfig) -> Result<SampledPath> {
    match cfg.protocol.path {
        PathKind::Linear => model.erasure_path(cfg.protocol.resolution),
        PathKind::Geodesic => model.geodesic_path(cfg.protocol.resolution),
    }
}

/// Per-N prediction table plus an optimum summary.
pub fn cmd_predict(cfg: &RunConfig, out_dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let noise = cfg.noise_model()?;
    let grid = cfg.protocol.grid()?;
    let mut table = Table::new(vec!["n", "wdiss_det", "wdiss_stoch", "wdiss_total", "variance"]);
    let mut outputs = Vec::new();

    let summary_extra = match &cfg.model {
        ModelConfig::Qubit { .. } => {
            let model = cfg.model.qubit_model()?;
            let schedule = qubit_schedule(cfg)?;
            for &n in &grid {
                let phi = noise.phi_tensor(n)?;
                let p = lr_wdiss_continuous(&schedule, n, &phi)?;
                let var = lr_variance(&schedule, n, &phi)?;
                table.push(vec![
                    n.into(),
                    p.wdiss_det.into(),
                    p.wdiss_stoch.into(),
                    p.wdiss_total.into(),
                    var.into(),
                ]);
            }
            let phi = noise.phi_tensor(*grid.last().unwrap())?;
            let metric = KuboMetric::new(&schedule);
            let proto = optimal_steps(&schedule.path, &metric, &phi, cfg.protocol.resolution)?;
            let mut extra = serde_json::json!({
                "model": "qubit",
                "gamma": model.gamma_renorm(),
                "omega_c": model.omega_c,
                "length": proto.length,
                "noise_integral": proto.noise_integral,
                "optimum": optimum_json(&proto.optimum),
            });
            if let Some(kappa) = cfg.protocol.kappa {
                let n_ref = grid[grid.len() / 2];
                let kc = kappa_cost(&schedule, n_ref, &phi, kappa, cfg.protocol.resolution)?;
                extra["kappa"] = serde_json::json!({
                    "kappa": kappa,
                    "cost": kc.cost,
                    "length": kc.length,
                    "noise_integral": kc.noise_integral,
                    "optimum": optimum_json(&kc.optimum),
                });
            }
            extra
        }
        ModelConfig::Ising { .. } => {
            if cfg.protocol.kappa.is_some() {
                return Err(Error::domain("kappa costs need the dense-operator (qubit) model"));
            }
            let model = cfg.model.ising_model()?;
            let path = ising_path(&model, cfg)?;
            for &n in &grid {
                let phi = noise.phi_tensor(n)?;
                let p = model.wdiss_linear(n, &phi, &path)?;
                table.push(vec![
                    n.into(),
                    p.wdiss_det.into(),
                    p.wdiss_stoch.into(),
                    p.wdiss_total.into(),
                    Cell::Empty,
                ]);
            }
            let phi = noise.phi_tensor(*grid.last().unwrap())?;
            let (optimum, _) = model.optimal_steps(&phi, cfg.protocol.resolution)?;
            let metric = model.metric();
            let geo = model.geodesic_path(cfg.protocol.resolution)?;
            let (_, b, l) = crate::predictor::path_functionals(&geo, &metric, &phi)?;
            serde_json::json!({
                "model": "ising",
                "per_site": true,
                "length": l,
                "noise_integral": b,
                "optimum": optimum_json(&optimum),
            })
        }
    };

    outputs.push(table.write(out_dir, "pred", format)?);
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary_extra)?;
    outputs.push(summary_path);

    if let Some(sweep) = &cfg.sweep {
        outputs.push(run_parameter_sweep(cfg, sweep, out_dir, format)?);
    }

    let m = manifest("predict", cfg, out_dir, &outputs, serde_json::json!({}))?;
    outputs.push(m);
    Ok(outputs)
}

/// (value, n_opt, w_opt, length, noise_integral) over a swept parameter.
fn run_parameter_sweep(
    cfg: &RunConfig,
    sweep: &crate::config::SweepConfig,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<PathBuf> {
    let mut table =
        Table::new(vec!["value", "n_opt_real", "w_opt", "length", "noise_integral"]);
    for &value in &sweep.values {
        let (optimum, length, noise_integral) = sweep_point(cfg, &sweep.variable, value)?;
        let (n_opt, w_opt) = match &optimum {
            StepOptimum::Finite { n_real, w_opt, .. } => (Cell::Num(*n_real), Cell::Num(*w_opt)),
            StepOptimum::Unbounded => (Cell::Empty, Cell::Empty),
        };
        table.push(vec![value.into(), n_opt, w_opt, length.into(), noise_integral.into()]);
    }
    table.write(out_dir, "sweep", format)
}

fn sweep_point(cfg: &RunConfig, variable: &str, value: f64) -> Result<(StepOptimum, f64, f64)> {
    let mut cfg = cfg.clone();
    match (variable, &mut cfg.model) {
        ("phi", _) => {}
        ("beta", ModelConfig::Qubit { beta, .. }) => *beta = value,
        ("beta", ModelConfig::Ising { beta, .. }) => *beta = value,
        ("h1", ModelConfig::Ising { h1, .. }) => *h1 = value,
        ("h1", ModelConfig::Qubit { omega1, .. }) => *omega1 = value,
        ("alpha", ModelConfig::Qubit { alpha, .. }) => *alpha = value,
        ("alpha", ModelConfig::Ising { .. }) => {
            return Err(Error::domain("alpha sweeps need the qubit model"))
        }
        ("n", _) => return Err(Error::domain("sweep over n duplicates n_grid; use n_grid")),
        (other, _) => return Err(Error::domain(format!("unknown sweep variable '{other}'"))),
    }
    let phi = if variable == "phi" {
        PhiTensor::constant_scalar(value)
    } else {
        let n_ref = cfg.protocol.grid()?.last().cloned().unwrap_or(128);
        cfg.noise_model()?.phi_tensor(n_ref)?
    };
    match &cfg.model {
        ModelConfig::Qubit { .. } => {
            let schedule = qubit_schedule(&cfg)?;
            let metric = KuboMetric::new(&schedule);
            let proto = optimal_steps(&schedule.path, &metric, &phi, cfg.protocol.resolution)?;
            Ok((proto.optimum, proto.length, proto.noise_integral))
        }
        ModelConfig::Ising { .. } => {
            let model = cfg.model.ising_model()?;
            let metric = model.metric();
            let path = model.erasure_path(cfg.protocol.resolution)?;
            let proto = optimal_steps(&path, &metric, &phi, cfg.protocol.resolution)?;
            Ok((proto.optimum, proto.length, proto.noise_integral))
        }
    }
}

/// Equilibrium free-energy change of the deterministic protocol endpoints;
/// the trajectory statistics absorb per-step free energies already, so this
/// is reported for reference only.
fn deterministic_delta_f(cfg: &RunConfig) -> Result<f64> {
    match &cfg.model {
        ModelConfig::Qubit { .. } => {
            let model = cfg.model.qubit_model()?;
            let beta = model.beta;
            let g0 = crate::operator::gibbs_state(&model.polaron_hamiltonian(model.omega0), beta)?;
            let g1 = crate::operator::gibbs_state(&model.polaron_hamiltonian(model.omega1), beta)?;
            Ok(-(g1.log_partition() - g0.log_partition()) / beta)
        }
        ModelConfig::Ising { .. } => {
            let model = cfg.model.ising_model()?;
            let l = match model.length {
                ChainLength::Finite(l) => l as f64,
                ChainLength::Infinite => return Err(Error::domain("needs a finite chain")),
            };
            let beta = model.beta;
            let mut dlogz = 0.0;
            for &k in &model.momentum_grid()? {
                dlogz += model.mode_gibbs(k, model.h1)?.log_partition()
                    - model.mode_gibbs(k, model.h0)?.log_partition();
            }
            // per site, matching the dissipation reporting convention
            Ok(-dlogz / (beta * l))
        }
    }
}

/// Monte Carlo N-sweep with prediction overlay columns.
pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let seed = cfg.require_seed()?;
    let noise = cfg.noise_model()?;
    let grid = cfg.protocol.grid()?;
    let r = cfg.run.r;

    let result = match &cfg.model {
        ModelConfig::Qubit { .. } => {
            let schedule = qubit_schedule(cfg)?;
            sweep_n(
                &|n| {
                    let model = DenseChainModel::from_schedule(&schedule, n)?;
                    let phi = noise.phi_tensor(n)?;
                    let pred = lr_wdiss_continuous(&schedule, n, &phi)?;
                    let var = lr_variance(&schedule, n, &phi)?;
                    Ok((Box::new(model) as Box<dyn TrajectoryModel>, pred, Some(var)))
                },
                &noise,
                &grid,
                r,
                seed,
                true,
            )?
        }
        ModelConfig::Ising { .. } => {
            let model = cfg.model.ising_model()?;
            if matches!(model.length, ChainLength::Infinite) {
                return Err(Error::domain("simulate needs a finite ising chain"));
            }
            let path = ising_path(&model, cfg)?;
            sweep_n(
                &|n| {
                    let chain = IsingModeChainModel::from_path(&model, &path, n)?;
                    let phi = noise.phi_tensor(n)?;
                    let pred = model.wdiss_linear(n, &phi, &path)?;
                    Ok((Box::new(chain) as Box<dyn TrajectoryModel>, pred, None))
                },
                &noise,
                &grid,
                r,
                seed,
                true,
            )?
        }
    };

    let mut table = Table::new(vec![
        "n",
        "r",
        "mean_wdiss",
        "stderr",
        "tpms_variance",
        "lr_wdiss",
        "lr_variance",
        "within_3stderr",
    ]);
    for row in &result.rows {
        table.push(vec![
            row.stats.n.into(),
            row.stats.trajectories.into(),
            row.stats.mean_wdiss.into(),
            row.stats.stderr.into(),
            row.stats.mean_tpms_variance.into(),
            row.prediction.wdiss_total.into(),
            row.lr_variance.into(),
            Cell::Text(row.within_band.to_string()),
        ]);
    }
    let mut outputs = vec![table.write(out_dir, "ensemble", format)?];
    let m = manifest(
        "simulate",
        cfg,
        out_dir,
        &outputs,
        serde_json::json!({
            "empirical_argmin_n": result.empirical_argmin,
            "within_3stderr": result.rows.iter().map(|r| r.within_band).collect::<Vec<_>>(),
            "deterministic_delta_f": deterministic_delta_f(cfg)?,
        }),
    )?;
    outputs.push(m);
    Ok(outputs)
}

/// (t, v, metric_speed) along the geodesic protocol.
pub fn cmd_geodesic(cfg: &RunConfig, out_dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let samples = 512usize;
    let mut table = Table::new(vec!["t", "v_1", "metric_speed"]);
    match &cfg.model {
        ModelConfig::Qubit { .. } => {
            let model = cfg.model.qubit_model()?;
            let schedule = model.schedule(PathKind::Linear, cfg.protocol.resolution)?;
            let metric = KuboMetric::new(&schedule);
            let geo = geodesic(&schedule.path, &metric, cfg.protocol.resolution)?;
            fill_geodesic_rows(&mut table, &geo, &metric, samples)?;
        }
        ModelConfig::Ising { .. } => {
            let model = cfg.model.ising_model()?;
            let metric = model.metric();
            let geo = model.geodesic_path(cfg.protocol.resolution)?;
            fill_geodesic_rows(&mut table, &geo, &metric, samples)?;
        }
    }
    let mut outputs = vec![table.write(out_dir, "geodesic", format)?];
    let m = manifest("geodesic", cfg, out_dir, &outputs, serde_json::json!({}))?;
    outputs.push(m);
    Ok(outputs)
}

fn fill_geodesic_rows(
    table: &mut Table,
    geo: &SampledPath,
    metric: &dyn Metric,
    samples: usize,
) -> Result<()> {
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        let v = geo.value(t);
        let speed = metric.speed(&v, &geo.velocity(t))?;
        table.push(vec![t.into(), v[0].into(), speed.into()]);
    }
    Ok(())
}

/// Ising-specific reports: magnetisation curves, per-site dissipation tables,
/// and the momentum-space vs brute-force oracle check.
pub fn cmd_ising(
    cfg: &RunConfig,
    sub: IsingCommand,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>> {
    let model = cfg.model.ising_model()?;
    let mut outputs = Vec::new();
    let detail = match sub {
        IsingCommand::Magnetisation => {
            let betas: Vec<f64> = match &cfg.sweep {
                Some(s) if s.variable == "beta" => s.values.clone(),
                _ => vec![model.beta],
            };
            let mut table = Table::new(vec!["beta", "h", "magnetisation"]);
            let samples = 200usize;
            for &beta in &betas {
                let m = IsingModel::new(model.coupling, model.length, model.h0, model.h1, beta)?;
                for i in 0..=samples {
                    let h = model.h0 + (model.h1 - model.h0) * i as f64 / samples as f64;
                    table.push(vec![beta.into(), h.into(), m.magnetisation(h).into()]);
                }
            }
            outputs.push(table.write(out_dir, "magnetisation", format)?);
            serde_json::json!({"betas": betas})
        }
        IsingCommand::Wdiss => {
            let noise = cfg.noise_model()?;
            let grid = cfg.protocol.grid()?;
            let path = ising_path(&model, cfg)?;
            let mut table =
                Table::new(vec!["n", "wdiss_det", "wdiss_stoch", "wdiss_total"]);
            for &n in &grid {
                let phi = noise.phi_tensor(n)?;
                let p = model.wdiss_linear(n, &phi, &path)?;
                table.push(vec![
                    n.into(),
                    p.wdiss_det.into(),
                    p.wdiss_stoch.into(),
                    p.wdiss_total.into(),
                ]);
            }
            outputs.push(table.write(out_dir, "wdiss", format)?);
            let phi = noise.phi_tensor(*grid.last().unwrap())?;
            let (optimum, _) = model.optimal_steps(&phi, cfg.protocol.resolution)?;
            optimum_json(&optimum)
        }
        IsingCommand::OracleCheck => {
            let sigma = if cfg.noise.sigma_eta > 0.0 { cfg.noise.sigma_eta } else { 0.05 };
            let mut table =
                Table::new(vec!["l", "case", "bruteforce", "momentum", "deviation"]);
            let mut max_dev = 0.0f64;
            for l in [2usize, 4, 6] {
                let m = IsingModel::new(model.coupling, ChainLength::Finite(l), model.h0, model.h1, model.beta)?;
                let base: Vec<f64> =
                    (0..=6).map(|i| m.h0 + (m.h1 - m.h0) * i as f64 / 6.0).collect();
                let cases: Vec<(String, Vec<f64>)> = std::iter::once(("noiseless".to_string(), base.clone()))
                    .chain((0..20).map(|s| {
                        let noise = NoiseModel::single(
                            crate::noise::NoiseProcess::new(crate::noise::NoiseKind::Gwn, sigma).unwrap(),
                        );
                        let traj = crate::noise::sample_trajectory(&noise, 6, cfg.run.seed.unwrap_or(1), s).unwrap();
                        let hs = base.iter().zip(traj.control(0)).map(|(h, x)| h + x).collect();
                        (format!("noisy-{s}"), hs)
                    }))
                    .collect();
                for (name, hs) in cases {
                    let brute = m.bruteforce_wdiss(&hs)?;
                    let modes = m.exact_wdiss_modes(&hs)?;
                    let dev = (brute - modes).abs();
                    max_dev = max_dev.max(dev);
                    table.push(vec![
                        l.into(),
                        Cell::Text(name),
                        brute.into(),
                        modes.into(),
                        dev.into(),
                    ]);
                }
            }
            outputs.push(table.write(out_dir, "oracle_check", format)?);
            println!("oracle-check max deviation: {max_dev:.3e}");
            serde_json::json!({"max_deviation": max_dev})
        }
    };
    let m = manifest("ising", cfg, out_dir, &outputs, detail)?;
    outputs.push(m);
    Ok(outputs)
}

/// Empirical increment variance against the analytic Φ for the configured
/// noise process.
pub fn cmd_noise_check(cfg: &RunConfig, out_dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let seed = cfg.require_seed()?;
    let noise = cfg.noise_model()?;
    let n_steps = cfg.protocol.n.unwrap_or(32);
    let trials = cfg.run.r.max(1000);
    let process = noise.process(0);
    let mut table = Table::new(vec!["n", "phi_analytic", "phi_empirical", "rel_error"]);
    for n in 0..n_steps {
        let analytic = process.increment_variance(n);
        let empirical = empirical_increment_variance(process, n_steps, n, trials, seed)?;
        let rel = if analytic > 0.0 { (empirical - analytic).abs() / analytic } else { 0.0 };
        table.push(vec![n.into(), analytic.into(), empirical.into(), rel.into()]);
    }
    let mut outputs = vec![table.write(out_dir, "noise_check", format)?];
    let m = manifest("noise-check", cfg, out_dir, &outputs, serde_json::json!({"trials": trials}))?;
    outputs.push(m);
    Ok(outputs)
}
