//! `infscale`: loss evaluation, inference-aware sizing, sweeps, table
//! regeneration and coefficient fitting from the command line.
//!
//! Exit codes: 0 success, 2 usage, 3 domain, 4 I/O.

mod commands;
mod number;
mod output;

use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Domain(m) | Failure::Io(m) => m,
        }
    }
}

impl From<infscale::Error> for Failure {
    fn from(err: infscale::Error) -> Self {
        match err {
            infscale::Error::Io(_) => Failure::Io(err.to_string()),
            _ => Failure::Domain(err.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "infscale",
    version,
    about = "Inference-aware LLM sizing from parametric scaling laws"
)]
struct Cli {
    /// Coefficient preset (chinchilla, fit-le100, fit-le250, fit-le500, fit-all) or JSON file.
    #[arg(
        long,
        global = true,
        default_value = "chinchilla",
        value_name = "PRESET|PATH"
    )]
    coeffs: String,

    /// Emit a JSON payload instead of text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

/// Target quality, as a loss or as the size of a Chinchilla-optimal model.
#[derive(Args, Debug, Clone, Copy)]
#[group(required = true, multiple = false)]
pub struct Quality {
    /// Target pre-training loss.
    #[arg(long, value_parser = number::positive)]
    loss: Option<f64>,

    /// Chinchilla-optimal model size whose loss is the target, e.g. 70B.
    #[arg(long, value_parser = number::positive, value_name = "PARAMS")]
    match_chinchilla: Option<f64>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct SizeAxis {
    /// Smallest Chinchilla-equivalent size on the quality axis.
    #[arg(long, default_value = "1B", value_parser = number::positive)]
    size_min: f64,

    #[arg(long, default_value = "100B", value_parser = number::positive)]
    size_max: f64,

    #[arg(long, default_value_t = 100)]
    size_count: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the loss of a (params, tokens) configuration.
    Loss {
        #[arg(long, value_parser = number::positive)]
        params: f64,
        #[arg(long, value_parser = number::positive)]
        tokens: f64,
    },
    /// Training-compute-optimal configuration for a quality target.
    Baseline {
        #[command(flatten)]
        quality: Quality,
    },
    /// Minimize training plus inference FLOPs.
    OptimizeCompute {
        #[command(flatten)]
        quality: Quality,
        /// Lifetime inference tokens.
        #[arg(long, value_parser = number::non_negative)]
        inference_tokens: f64,
    },
    /// Minimize training plus inference dollar cost.
    OptimizeCost {
        #[command(flatten)]
        quality: Quality,
        /// Lifetime inference requests; replaces the config's request count.
        #[arg(long, value_parser = number::non_negative)]
        requests: Option<f64>,
        /// Cost config JSON (hardware, mfu, demand sections).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// FLOP-ratio grid over quality x inference tokens, written as CSV.
    SweepCompute {
        #[command(flatten)]
        sizes: SizeAxis,
        #[arg(long, default_value = "1e9", value_parser = number::positive)]
        inference_min: f64,
        #[arg(long, default_value = "1e15", value_parser = number::positive)]
        inference_max: f64,
        #[arg(long, default_value_t = 100)]
        inference_count: usize,
        /// Prepend a zero-demand column.
        #[arg(long)]
        with_zero_demand: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cost-ratio grid over quality x inference requests, written as CSV.
    SweepCost {
        #[command(flatten)]
        sizes: SizeAxis,
        #[arg(long, default_value = "1e6", value_parser = number::positive)]
        requests_min: f64,
        #[arg(long, default_value = "1e11", value_parser = number::positive)]
        requests_max: f64,
        #[arg(long, default_value_t = 100)]
        requests_count: usize,
        #[arg(long)]
        with_zero_demand: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit loss-law coefficients to a params,tokens,loss CSV.
    Fit {
        runs: PathBuf,
        /// Keep only runs with at most this many tokens per parameter.
        #[arg(long, value_parser = number::positive)]
        max_ratio: Option<f64>,
        /// Write the fitted coefficients as JSON usable with --coeffs.
        #[arg(long)]
        coeffs_out: Option<PathBuf>,
    },
    /// Regenerate the published compute and cost tables.
    Tables,
}

fn run(cli: Cli) -> Result<String, Failure> {
    let coeffs = commands::load_coefficients(&cli.coeffs)?;
    let json = cli.json;
    let mut out = String::new();
    match cli.command {
        Command::Loss { params, tokens } => commands::loss(&mut out, &coeffs, params, tokens, json),
        Command::Baseline { quality } => commands::baseline(&mut out, &coeffs, quality, json),
        Command::OptimizeCompute {
            quality,
            inference_tokens,
        } => commands::optimize_compute(&mut out, &coeffs, quality, inference_tokens, json),
        Command::OptimizeCost {
            quality,
            requests,
            config,
        } => commands::optimize_cost(
            &mut out,
            &coeffs,
            quality,
            requests,
            config.as_deref(),
            json,
        ),
        Command::SweepCompute {
            sizes,
            inference_min,
            inference_max,
            inference_count,
            with_zero_demand,
            out: csv,
        } => {
            let demand = commands::DemandAxis {
                min: inference_min,
                max: inference_max,
                count: inference_count,
                with_zero: with_zero_demand,
                flag: "inference",
            };
            commands::sweep(&mut out, &coeffs, sizes, demand, None, &csv, json)
        }
        Command::SweepCost {
            sizes,
            requests_min,
            requests_max,
            requests_count,
            with_zero_demand,
            config,
            out: csv,
        } => {
            let demand = commands::DemandAxis {
                min: requests_min,
                max: requests_max,
                count: requests_count,
                with_zero: with_zero_demand,
                flag: "requests",
            };
            let config = commands::load_cost_config(config.as_deref())?;
            commands::sweep(&mut out, &coeffs, sizes, demand, Some(config), &csv, json)
        }
        Command::Fit {
            runs,
            max_ratio,
            coeffs_out,
        } => commands::fit(&mut out, &runs, max_ratio, coeffs_out.as_deref(), json),
        Command::Tables => commands::tables(&mut out, &coeffs, json),
    }?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            // A closed pipe (e.g. `| head`) is not an error for the caller.
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != ErrorKind::BrokenPipe => {
                    eprintln!("error: stdout: {e}");
                    ExitCode::from(4)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
