//! Landauer erasure of a transverse-field Ising chain: magnetisation against
//! the field at several temperatures, and how the optimal step count and
//! minimal dissipation move with noise strength and temperature.
//!
//! Run with: cargo run --release --example ising_erasure

use stepeq::ising::{ChainLength, IsingModel};
use stepeq::noise::PhiTensor;

fn main() -> stepeq::Result<()> {
    // thermal magnetisation per spin across the transition, L -> infinity
    println!("magnetisation per spin <sigma_z>(h):");
    println!("{:>6} {:>12} {:>12} {:>12}", "h", "beta=0.01", "beta=1", "beta=100");
    for i in 0..=10 {
        let h = 5.0 * i as f64 / 10.0;
        let row: Vec<f64> = [0.01, 1.0, 100.0]
            .iter()
            .map(|&beta| {
                IsingModel::new(1.0, ChainLength::Infinite, 0.0, 5.0, beta)
                    .unwrap()
                    .magnetisation(h)
            })
            .collect();
        println!("{h:>6.2} {:>12.6} {:>12.6} {:>12.6}", row[0], row[1], row[2]);
    }
    println!("hot chains barely respond to the control; cold chains saturate beyond h = 1\n");

    // optimum vs noise strength at beta = 1: W_opt ~ sqrt(Phi), N_opt ~ 1/sqrt(Phi)
    let model = IsingModel::new(1.0, ChainLength::Infinite, 0.0, 5.0, 1.0)?;
    println!("{:>10} {:>10} {:>12}", "Phi", "N_opt", "W_opt/site");
    for k in 0..5 {
        let phi = 1e-4 * 10f64.powf(k as f64 / 2.0);
        let (opt, _) = model.optimal_steps(&PhiTensor::constant_scalar(phi), 768)?;
        println!(
            "{phi:>10.2e} {:>10.1} {:>12.6}",
            opt.n_real().unwrap(),
            opt.w_opt().unwrap()
        );
    }

    // optimum vs temperature at fixed Phi
    println!("\n{:>8} {:>10} {:>12}", "beta", "N_opt", "W_opt/site");
    for beta in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let m = IsingModel::new(1.0, ChainLength::Infinite, 0.0, 5.0, beta)?;
        let (opt, _) = m.optimal_steps(&PhiTensor::constant_scalar(1e-3), 768)?;
        println!(
            "{beta:>8.2} {:>10.1} {:>12.6}",
            opt.n_real().unwrap(),
            opt.w_opt().unwrap()
        );
    }
    println!("\nhigher temperature: more steps are optimal and the floor is lower");
    Ok(())
}
