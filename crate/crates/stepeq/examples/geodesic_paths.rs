//! Geodesic protocols: constant thermodynamic speed, equal-length steps,
//! and the dissipation advantage over a plain linear ramp. For the Ising
//! chain at low temperature the geodesic visibly slows down around the
//! critical point h = 1.
//!
//! Run with: cargo run --release --example geodesic_paths

use stepeq::geometry::{discretize_equal_length, path_length, KuboMetric, Metric};
use stepeq::ising::{ChainLength, IsingModel};
use stepeq::noise::PhiTensor;
use stepeq::predictor::lr_wdiss_discrete_points;
use stepeq::qubit::{PathKind, QubitModel};

fn main() -> stepeq::Result<()> {
    let model = QubitModel::new(1.0, -5.0, 5.0, 0.5, 1.0, 1.0)?;
    let linear = model.schedule(PathKind::Linear, 1024)?;
    let geo = model.schedule(PathKind::Geodesic, 1024)?;
    let metric = KuboMetric::new(&linear);

    let l = path_length(&geo.path, &metric, 2048)?;
    println!("qubit sweep, thermodynamic length L = {l:.6}");

    // metric speed along the geodesic is flat
    let speeds: Vec<f64> = (1..40)
        .map(|i| {
            let t = i as f64 / 40.0;
            metric.speed(&geo.path.value(t), &geo.path.velocity(t)).unwrap()
        })
        .collect();
    let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let sd = (speeds.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / speeds.len() as f64).sqrt();
    println!("metric speed along the geodesic: {mean:.6} +- {sd:.2e} (target: L, flat)\n");

    println!("discrete dissipation, linear ramp vs equal-length geodesic steps:");
    println!("{:>6} {:>14} {:>14} {:>9}", "N", "linear", "geodesic", "ratio");
    let zero = PhiTensor::zero(1);
    for n in [8usize, 16, 32, 64, 128] {
        let lin_pts = discretize_equal_length(&linear.path, &ConstantSpeed, n)?;
        let geo_pts = discretize_equal_length(&geo.path, &metric, n)?;
        let wl = lr_wdiss_discrete_points(&linear, &lin_pts, &zero)?.wdiss_total;
        let wg = lr_wdiss_discrete_points(&geo, &geo_pts, &zero)?.wdiss_total;
        println!("{n:>6} {wl:>14.6} {wg:>14.6} {:>9.3}", wl / wg);
    }

    // low-temperature Ising geodesic dwells near the critical point
    let ising = IsingModel::new(1.0, ChainLength::Infinite, 0.0, 5.0, 5.0)?;
    let path = ising.geodesic_path(768)?;
    println!("\nTFIM erasure geodesic at beta = 5 (field value vs protocol time):");
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        let h = path.value(t)[0];
        println!("  t = {t:.1}  h = {h:.3} {}", if (0.8..=1.2).contains(&h) { "  <- near critical point" } else { "" });
    }
    Ok(())
}

/// Uniform parametrization stand-in so the linear ramp is split evenly in v.
struct ConstantSpeed;

impl Metric for ConstantSpeed {
    fn dims(&self) -> usize {
        1
    }

    fn eval(&self, _v: &[f64]) -> stepeq::Result<nalgebra::DMatrix<f64>> {
        Ok(nalgebra::DMatrix::from_element(1, 1, 1.0))
    }
}
