//! Discrete noise families and their increment variances: white noise,
//! random walk, AR(1) between them, and a full-memory AR(n) process whose
//! variance profile plateaus before slowly diverging.
//!
//! Run with: cargo run --release --example noise_families

use stepeq::geometry::KuboMetric;
use stepeq::noise::{
    empirical_increment_variance, ArRule, NoiseKind, NoiseModel, NoiseProcess,
};
use stepeq::predictor::optimal_steps;
use stepeq::qubit::{PathKind, QubitModel};

fn main() -> stepeq::Result<()> {
    let sigma = 0.05;
    println!("increment variances Phi_n at sigma_eta = {sigma} (analytic | empirical, 20000 paths)");
    let cases = [
        ("gwn", NoiseKind::Gwn),
        ("wiener", NoiseKind::Wiener),
        ("ar1 phi=0.5", NoiseKind::Ar1(0.5)),
    ];
    for (name, kind) in cases {
        let p = NoiseProcess::new(kind, sigma)?;
        let analytic = p.increment_variance(3);
        let empirical = empirical_increment_variance(&p, 8, 3, 20_000, 11)?;
        println!("  {name:<14} {analytic:.6} | {empirical:.6}");
    }

    // the stationary AR(1) value sits strictly between Wiener and GWN
    println!("\nPhi ordering: Phi_wiener < Phi_ar1(phi) < Phi_gwn = 2 Phi_wiener");

    // optimal step counts inherit the Phi ratios: N_opt ~ 1/sqrt(Phi)
    let model = QubitModel::new(1.0, -5.0, 5.0, 0.5, 1.0, 1.0)?;
    let schedule = model.schedule(PathKind::Geodesic, 1024)?;
    let metric = KuboMetric::new(&schedule);
    println!("\n{:<14} {:>10} {:>10}", "process", "N_opt", "W_opt");
    for (name, kind) in [
        ("gwn", NoiseKind::Gwn),
        ("ar1 phi=0.5", NoiseKind::Ar1(0.5)),
        ("wiener", NoiseKind::Wiener),
    ] {
        let noise = NoiseModel::single(NoiseProcess::new(kind, sigma)?);
        let proto = optimal_steps(&schedule.path, &metric, &noise.phi_tensor(1)?, 1024)?;
        println!(
            "{name:<14} {:>10.1} {:>10.6}",
            proto.optimum.n_real().unwrap(),
            proto.optimum.w_opt().unwrap()
        );
    }
    println!("(W_opt ratio GWN/Wiener = sqrt(2); N_opt ratio its reciprocal)");

    // full-memory AR(n) with exponentially decaying response phi_m = A e^{-m}
    let arn = NoiseProcess::new(
        NoiseKind::ArN(ArRule::Exponential { amplitude: 0.642, decay: 1.0 }),
        sigma,
    )?;
    println!("\nAR(n) increment variance profile (A = 0.642, decay = 1):");
    for n in [0usize, 1, 2, 4, 8, 16, 32, 64, 128] {
        let v = arn.increment_variance(n);
        let bar = "#".repeat((v / (2.0 * sigma * sigma) * 20.0) as usize);
        println!("  n = {n:>3}: {v:.6} {bar}");
    }
    println!("plateaus after n > 2, then slowly diverges for this parameter choice");
    Ok(())
}
