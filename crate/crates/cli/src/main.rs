use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

use config::{Format, Overrides, Profile};

/// Invalid flags, config values or inputs that should be fixed by the
/// caller. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "ifsnr", version, about = "Periodic-to-random SNR estimation for quasi-periodic signals")]
struct Cli {
    /// TOML file with defaults for any option below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "IFSNR_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Report {
    Figs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Window metrics, optionally with shape and gain curves.
    WindowInfo {
        #[arg(long, conflicts_with = "all")]
        kind: Option<String>,
        #[arg(long)]
        all: bool,
        #[arg(long, conflicts_with = "json")]
        csv: bool,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 64)]
        oversample: usize,
        /// Also write shape and gain curves (CSV) here.
        #[arg(long)]
        curves: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit C0 for one or more windows from a pulse-train simulation.
    Calibrate {
        #[arg(long)]
        window: Option<String>,
        #[arg(long, value_enum)]
        profile: Option<Profile>,
        #[arg(long)]
        seed: Option<u64>,
        /// Fit C0 at this one true SNR instead of the window's default range.
        #[arg(long)]
        anchor_snr: Option<f64>,
        #[arg(long, default_value_t = 44100.0)]
        sample_rate: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Estimate distributions per window and true SNR.
    Simulate {
        #[arg(long)]
        window: Option<String>,
        #[arg(long, value_enum)]
        profile: Option<Profile>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "figs")]
        report: Report,
        /// Calibration table; C0 is fitted from the simulation when absent.
        #[arg(long)]
        cal: Option<PathBuf>,
        /// Long-form CDF rows.
        #[arg(long)]
        out: PathBuf,
        /// Median and spread per condition.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, default_value_t = 44100.0)]
        sample_rate: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Harmonic SNR map of a recording with a known f0 track.
    Analyze {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        f0: PathBuf,
        #[arg(long)]
        cal: Option<PathBuf>,
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Analyse on the original time axis.
        #[arg(long)]
        no_warp: bool,
        /// Frequency step of the dense JSON grid, Hz.
        #[arg(long, default_value_t = 50.0)]
        grid_step_hz: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Smoothed instantaneous frequency per frame (debugging aid).
    Ifgram {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        window: Option<String>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Highest bin frequency written, Hz.
        #[arg(long, default_value_t = 5000.0)]
        max_freq: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<ifsnr::Error>() {
        Some(ifsnr::Error::InvalidSpec(_) | ifsnr::Error::Config(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::warn!("could not size thread pool: {e}");
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
