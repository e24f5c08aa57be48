//! Batch front door for step-equilibration studies: parse a run config,
//! dispatch to the library, emit CSV/JSON for external plotting.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stepeq::config::RunConfig;
use stepeq::report::OutputFormat;
use stepeq::runner::{self, IsingCommand};

#[derive(Parser)]
#[command(name = "stepeq", version, about = "Quench protocols under stochastic control: predictions and trajectory ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file (sectioned key = value text)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: [run] out from the config, else '.')
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed override
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = library default)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output file format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Linear-response prediction tables and the optimum-step summary
    Predict,
    /// Monte Carlo trajectory ensembles over the configured N grid
    Simulate,
    /// Export the geodesic protocol with its metric speed
    Geodesic,
    /// Ising-specific reports
    Ising {
        #[arg(value_enum)]
        what: IsingWhat,
    },
    /// Empirical increment variance of the configured noise process vs analytic
    NoiseCheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum IsingWhat {
    Magnetisation,
    Wdiss,
    OracleCheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> stepeq::Result<Vec<PathBuf>> {
    let config_path = cli
        .config
        .ok_or_else(|| stepeq::Error::config(0, "--config PATH is required"))?;
    let mut cfg = RunConfig::from_file(&config_path)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = Some(seed);
    }
    if cli.threads > 0 {
        cfg.run.threads = cli.threads;
    }
    if cfg.run.threads > 0 {
        // ignore failure if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.threads)
            .build_global();
    }
    let out_dir = cli
        .out
        .or_else(|| cfg.run.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let format = match cli.format {
        Format::Csv => OutputFormat::Csv,
        Format::Json => OutputFormat::Json,
    };
    match cli.command {
        Command::Predict => runner::cmd_predict(&cfg, &out_dir, format),
        Command::Simulate => runner::cmd_simulate(&cfg, &out_dir, format),
        Command::Geodesic => runner::cmd_geodesic(&cfg, &out_dir, format),
        Command::Ising { what } => {
            let sub = match what {
                IsingWhat::Magnetisation => IsingCommand::Magnetisation,
                IsingWhat::Wdiss => IsingCommand::Wdiss,
                IsingWhat::OracleCheck => IsingCommand::OracleCheck,
            };
            runner::cmd_ising(&cfg, sub, &out_dir, format)
        }
        Command::NoiseCheck => runner::cmd_noise_check(&cfg, &out_dir, format),
    }
}
