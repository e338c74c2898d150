//! `timebin` — simulate coherent measurement of time-bin encoded photons via
//! chirped-pulse upconversion: spectra, separability bounds, entangled-pair
//! fringes, CHSH tests, projective measurements, and state tomography.
//!
//! Exit codes: 0 success, 2 input/configuration error, 3 physics-regime
//! error (chirps too weak or not opposite).

mod commands;
mod config;
mod output;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

use config::{bins_to_coefficients, ExperimentConfig, ProjectorFile};
use output::{OutputDir, TableFormat};

#[derive(Parser)]
#[command(
    name = "timebin",
    version,
    about = "Chirped-pulse upconversion simulator for time-bin qubits and qudits"
)]
struct Cli {
    /// Experiment parameter file (TOML); built-in defaults otherwise.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed override for all stochastic outputs.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory (default: from config, "out").
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Fringe-visibility override for the entangled-pair model.
    #[arg(long, global = true, value_name = "V")]
    visibility: Option<f64>,

    /// Mean counts per measurement setting override.
    #[arg(long, global = true, value_name = "N")]
    counts_mean: Option<f64>,

    /// Table output format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: TableFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upconverted spectra (numeric and closed form) plus the peak report.
    Spectrum,
    /// Coincidence fringes against the signal phase with sinusoid fits.
    Fringe {
        /// Idler phases in units of pi, comma-separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 1.0, 0.5, 1.5])]
        gammas_over_pi: Vec<f64>,
        /// Number of beta steps covering one full turn.
        #[arg(long, default_value_t = 24)]
        beta_steps: usize,
        /// Emit expected counts instead of Poisson draws.
        #[arg(long)]
        noiseless: bool,
    },
    /// CHSH parameter with Poissonian Monte-Carlo error.
    Chsh {
        /// Four phases (a, a', b, b') in units of pi; optimal set otherwise.
        #[arg(long, value_delimiter = ',', num_args = 4, value_name = "A,A2,B,B2")]
        phases_over_pi: Option<Vec<f64>>,
        #[arg(long, default_value_t = 400)]
        resamples: usize,
    },
    /// Maximum-likelihood density-matrix reconstruction.
    Tomo {
        /// Simulate counts from the configured entangled-pair model.
        #[arg(long)]
        simulate: bool,
        /// Read a counts CSV instead of simulating.
        #[arg(long, value_name = "PATH")]
        counts_file: Option<PathBuf>,
        /// With --simulate: use expected counts instead of Poisson draws.
        #[arg(long)]
        noiseless: bool,
        /// Monte-Carlo resamples for error bars (0 disables).
        #[arg(long, default_value_t = 400)]
        mc_resamples: usize,
    },
    /// Bin-spacing separability bounds.
    Bounds,
    /// Probabilities of one state against a projector definition file.
    Project {
        #[arg(long, value_name = "PATH")]
        projector: PathBuf,
        /// Qubit state polar angle in units of pi (two-bin projectors).
        #[arg(long, default_value_t = 0.25)]
        theta_over_pi: f64,
        /// Qubit state relative phase in units of pi.
        #[arg(long, default_value_t = 0.0)]
        phi_over_pi: f64,
        /// Explicit state bins as "mag:phase_over_pi,..." (any dimension).
        #[arg(long, value_name = "BINS")]
        state_bins: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<timebin_core::Error>() {
        Some(timebin_core::Error::WeakChirp { .. })
        | Some(timebin_core::Error::ChirpMismatch { .. }) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.noise.seed = seed;
    }
    if let Some(v) = cli.visibility {
        config.noise.fringe_visibility = v;
    }
    if let Some(mean) = cli.counts_mean {
        config.noise.counts_per_setting_mean = mean;
    }
    config.validate()?;

    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    let out = OutputDir::create(&out_dir, cli.format)?;

    match &cli.command {
        Command::Spectrum => commands::cmd_spectrum(&config, &out),
        Command::Fringe {
            gammas_over_pi,
            beta_steps,
            noiseless,
        } => commands::cmd_fringe(&config, &out, gammas_over_pi, *beta_steps, *noiseless),
        Command::Chsh {
            phases_over_pi,
            resamples,
        } => {
            let phases = match phases_over_pi {
                Some(v) if v.len() == 4 => Some([v[0], v[1], v[2], v[3]]),
                Some(v) => bail!("--phases-over-pi needs exactly 4 values, got {}", v.len()),
                None => None,
            };
            commands::cmd_chsh(&config, &out, phases, *resamples)
        }
        Command::Tomo {
            simulate,
            counts_file,
            noiseless,
            mc_resamples,
        } => commands::cmd_tomo(
            &config,
            &out,
            *simulate,
            counts_file.as_deref(),
            *noiseless,
            *mc_resamples,
        ),
        Command::Bounds => commands::cmd_bounds(&config, &out),
        Command::Project {
            projector,
            theta_over_pi,
            phi_over_pi,
            state_bins,
        } => {
            let file = ProjectorFile::load(projector)?;
            let state = match state_bins {
                Some(text) => parse_state_bins(text)?,
                None => {
                    if file.dimension != 2 {
                        bail!(
                            "projector has dimension {}; pass --state-bins for non-qubit states",
                            file.dimension
                        );
                    }
                    let theta = theta_over_pi * std::f64::consts::PI;
                    let phi = phi_over_pi * std::f64::consts::PI;
                    vec![
                        num_complex::Complex64::new(theta.cos(), 0.0),
                        num_complex::Complex64::from_polar(theta.sin(), phi),
                    ]
                }
            };
            commands::cmd_project(&config, &out, &file, state)
        }
    }
}

fn parse_state_bins(text: &str) -> Result<Vec<num_complex::Complex64>> {
    let pairs: Vec<[f64; 2]> = text
        .split(',')
        .map(|token| {
            let parts: Vec<&str> = token.split(':').collect();
            if parts.len() != 2 {
                bail!("state bin '{token}' is not 'magnitude:phase_over_pi'");
            }
            Ok([parts[0].trim().parse()?, parts[1].trim().parse()?])
        })
        .collect::<Result<_>>()?;
    bins_to_coefficients(&pairs)
}
