//! Step-equilibration protocols under stochastic classical control.
//!
//! A quench protocol alternates sudden Hamiltonian updates with full
//! thermalisation. Without control noise, dissipation falls off as 1/N in the
//! number of steps; weak Gaussian noise on the controls adds a contribution
//! growing linearly in N, so a finite optimal step count emerges. This crate
//! computes exact dissipated work along quench chains, the thermodynamic
//! geometry that predicts the optimum (lengths, Kubo and fluctuation metrics,
//! geodesic protocols), work-fluctuation statistics through cumulant
//! generating functions, and validates the predictions with seeded Monte Carlo
//! trajectory ensembles for two models: a polaron-dressed Landau-Zener qubit
//! and a transverse-field Ising chain in momentum space.
//!
//! Start with the runnable examples
//! (`cargo run --release -p stepeq --example qubit_optimal_steps`) or the
//! `stepeq` binary, which exposes predict / simulate / geodesic / ising /
//! noise-check batch commands over a plain-text config file.

pub mod config;
pub mod error;
pub mod geometry;
pub mod ising;
pub mod montecarlo;
pub mod noise;
pub mod operator;
pub mod predictor;
pub mod quad;
pub mod qubit;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
