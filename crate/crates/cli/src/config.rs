//! Effective run configuration: CLI flags over a TOML file over defaults.

use std::path::Path;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use ifsnr::calibration::SweepConfig;
use ifsnr::snr_index::{EstimatorConfig, DEFAULT_CEILING_DB};
use ifsnr::windows::{WindowKind, DEFAULT_LENGTH_SCALE};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Full,
}

impl Profile {
    pub fn sweep(self, fft_size: usize) -> SweepConfig {
        let base = match self {
            Profile::Desk => SweepConfig::desk(),
            Profile::Full => SweepConfig::full(),
        };
        SweepConfig { fft_size, ..base }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub window: Option<String>,
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub fft_size: Option<usize>,
    pub f_tgt: Option<f64>,
    pub smoothing_width: Option<f64>,
    pub length_scale: Option<f64>,
    pub frame_period: Option<f64>,
    pub ceiling_db: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }
}

/// Analysis overrides shared by the subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// FFT length in samples (power of two).
    #[arg(long)]
    pub fft_size: Option<usize>,
    /// Target fundamental the window is designed for, Hz.
    #[arg(long)]
    pub f_tgt: Option<f64>,
    /// Smoothing kernel halfwidth as a fraction of f_tgt.
    #[arg(long)]
    pub smoothing_width: Option<f64>,
    /// Window length as a multiple of its nominal length.
    #[arg(long)]
    pub length_scale: Option<f64>,
    /// Analysis frame spacing, s.
    #[arg(long)]
    pub frame_period: Option<f64>,
}

/// Analysis settings after merging, echoed into output headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Analysis {
    pub fft_size: usize,
    pub f_tgt: f64,
    pub smoothing_width: f64,
    pub length_scale: f64,
    pub frame_period: f64,
    pub ceiling_db: f64,
}

impl Analysis {
    pub fn resolve(flags: &Overrides, file: &FileConfig) -> anyhow::Result<Self> {
        let d = EstimatorConfig::default();
        let a = Analysis {
            fft_size: flags.fft_size.or(file.fft_size).unwrap_or(d.fft_size),
            f_tgt: flags.f_tgt.or(file.f_tgt).unwrap_or(d.f_tgt),
            smoothing_width: flags
                .smoothing_width
                .or(file.smoothing_width)
                .unwrap_or(d.smoothing_width),
            length_scale: flags
                .length_scale
                .or(file.length_scale)
                .unwrap_or(DEFAULT_LENGTH_SCALE),
            frame_period: flags.frame_period.or(file.frame_period).unwrap_or(0.005),
            ceiling_db: file.ceiling_db.unwrap_or(DEFAULT_CEILING_DB),
        };
        a.validate()?;
        Ok(a)
    }

    fn validate(&self) -> anyhow::Result<()> {
        let bad = |what: &str, v: f64| -> anyhow::Result<()> {
            Err(UsageError(format!("{what} out of range: {v}")).into())
        };
        if !self.fft_size.is_power_of_two() || self.fft_size < 256 || self.fft_size > 1 << 22 {
            return bad("fft_size", self.fft_size as f64);
        }
        if !(self.f_tgt > 0.0 && self.f_tgt.is_finite()) {
            return bad("f_tgt", self.f_tgt);
        }
        if !(self.smoothing_width > 0.0 && self.smoothing_width <= 1.0) {
            return bad("smoothing_width", self.smoothing_width);
        }
        if !(self.length_scale > 0.0 && self.length_scale <= 10.0) {
            return bad("length_scale", self.length_scale);
        }
        if !(self.frame_period > 0.0 && self.frame_period <= 1.0) {
            return bad("frame_period", self.frame_period);
        }
        if !self.ceiling_db.is_finite() {
            return bad("ceiling_db", self.ceiling_db);
        }
        Ok(())
    }

    pub fn estimator(&self, window: WindowKind, sample_rate: f64) -> EstimatorConfig {
        EstimatorConfig {
            window,
            f_tgt: self.f_tgt,
            sample_rate,
            length_scale: self.length_scale,
            smoothing_width: self.smoothing_width,
            fft_size: self.fft_size,
            ..EstimatorConfig::default()
        }
    }
}

/// `--window` value: one kind or `all`.
pub fn parse_windows(spec: &str) -> anyhow::Result<Vec<WindowKind>> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok(WindowKind::ALL.to_vec());
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<WindowKind>()
                .map_err(|e| UsageError(e.to_string()).into())
        })
        .collect()
}
