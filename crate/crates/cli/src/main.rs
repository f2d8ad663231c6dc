//! `entdist`: run the simulation and analysis experiments from the command
//! line and write plot-ready CSV/JSON files.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 simulation or
//! estimation failure.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use entdist_core::dispersion::{analyze_sweep, load_sweep};
use entdist_core::experiments::{
    bounds_report, longrun, rate_fidelity, simulate_sweep_experiment, write_longrun, write_rate_fidelity, RunConfig,
};
use entdist_core::source::CoincidenceCounts;
use entdist_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "entdist",
    version,
    about = "Polarization-entanglement distribution experiments"
)]
struct Cli {
    /// JSON run configuration (see `gen-config`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all random streams; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze a polarimeter sweep CSV into figure-panel CSVs and a report.
    AnalyzeSweep {
        sweep: PathBuf,
        /// Wavelength whose rotation is undone (nm).
        #[arg(long)]
        reference_nm: Option<f64>,
        /// Comma-separated spectral widths (nm) for the bandwidth scan.
        #[arg(long, value_delimiter = ',')]
        fwhm: Option<Vec<f64>>,
    },
    /// Simulate a sweep through a synthetic dispersive fiber.
    SimulateSweep,
    /// Fidelity bounds versus pair rate.
    RateFidelity,
    /// Multi-day run with automated compensation.
    Longrun {
        /// Add trailing-average columns over this many hours.
        #[arg(long)]
        trailing_average_h: Option<f64>,
    },
    /// Fidelity bounds for a coincidence-counts JSON file.
    Bounds { counts: PathBuf },
    /// Print the default configuration with notes.
    GenConfig,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Simulation(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Simulation(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_simulation_failure() {
            Failure::Simulation(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Simulation(_) => 3,
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let seed = cfg.seed;
    let out = cli.out.as_path();

    match cli.command {
        Command::AnalyzeSweep {
            sweep,
            reference_nm,
            fwhm,
        } => {
            let mut opts = cfg.analyze_sweep;
            if let Some(r) = reference_nm {
                opts.reference_nm = r;
            }
            if let Some(f) = fwhm {
                opts.fwhm_nm = f;
            }
            let sweep = load_sweep(&sweep)?;
            let report = analyze_sweep(&sweep, &opts)?;
            print_written(&report.write(out)?);
        }
        Command::SimulateSweep => {
            let sweep = simulate_sweep_experiment(&cfg.simulate_sweep, seed)?;
            create_dir(out)?;
            let path = out.join("sweep.csv");
            sweep.save(&path)?;
            print_written(&[path]);
        }
        Command::RateFidelity => {
            let points = rate_fidelity(&cfg.rate_fidelity, seed)?;
            create_dir(out)?;
            let path = out.join("rate_fidelity.csv");
            write_rate_fidelity(&path, &points)?;
            for p in &points {
                println!(
                    "rate {:>10.1}  lower {:.4} +- {:.4}  upper {:.4} +- {:.4}  theory {:.4}",
                    p.rate, p.lower, p.sigma_l, p.upper, p.sigma_u, p.theory_f
                );
            }
            print_written(&[path]);
        }
        Command::Longrun { trailing_average_h } => {
            let mut lc = cfg.longrun;
            if trailing_average_h.is_some() {
                lc.trailing_average_h = trailing_average_h;
            }
            let res = longrun(&lc, seed)?;
            let written = write_longrun(out, &res, lc.trailing_average_h)?;
            println!(
                "uptime {:.5}  checks {}  optimizations {}  jumps {}",
                res.uptime(),
                res.cycles.len() - res.optimizations(),
                res.optimizations(),
                res.jumps
            );
            print_written(&written);
        }
        Command::Bounds { counts } => {
            let counts = CoincidenceCounts::from_file(&counts)?;
            let report = bounds_report(&counts, &cfg.bounds, seed)?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Input(e.to_string()))?;
            println!("{text}");
            create_dir(out)?;
            let path = out.join("bounds.json");
            fs::write(&path, text + "\n").map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        }
        Command::GenConfig => {
            let text = serde_json::to_string_pretty(&RunConfig::annotated_defaults())
                .map_err(|e| Failure::Input(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
