use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde_json::{json, Map, Value};

use ifsnr::calibration::{
    calibrate, cdf_probabilities, distribution_report, run_sweep, AnchorPolicy, EstimateDistribution,
    SweepConfig, TestSignalSpec,
};
use ifsnr::ifgram::{smoothed_if_map, FrameAnalyzer};
use ifsnr::io::{read_f0_track_file, read_wav};
use ifsnr::snr_index::{CalibrationConstant, Estimator, EstimatorConfig};
use ifsnr::speech::{analyze_utterance, interpolate_map, AnalysisSettings};
use ifsnr::windows::{window_gain_curve, window_metrics, window_shape_curve, WindowKind};

use crate::config::{parse_windows, Analysis, FileConfig, Format, Overrides, Profile};
use crate::output::{self, csv_header, json_document, write_json};
use crate::{Cli, Command, UsageError};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::WindowInfo { kind, all, csv, json, oversample, curves, out } => {
            let kinds = match (kind, all) {
                (_, true) => WindowKind::ALL.to_vec(),
                (Some(k), false) => parse_windows(&k)?,
                (None, false) => match &file.window {
                    Some(w) => parse_windows(w)?,
                    None => return Err(UsageError("pass --kind <name> or --all".into()).into()),
                },
            };
            let format = if csv {
                Format::Csv
            } else if json {
                Format::Json
            } else {
                file.format.unwrap_or(Format::Csv)
            };
            window_info(&kinds, format, oversample, curves.as_deref(), out.as_deref())
        }
        Command::Calibrate { window, profile, seed, anchor_snr, sample_rate, out, overrides } => {
            let job = SweepJob::resolve(&file, window, profile, seed, sample_rate, &overrides)?;
            cmd_calibrate(&job, anchor_snr, &out)
        }
        Command::Simulate { window, profile, seed, report: _, cal, out, summary, sample_rate, overrides } => {
            let job = SweepJob::resolve(&file, window, profile, seed, sample_rate, &overrides)?;
            cmd_simulate(&job, cal.as_deref(), &out, summary.as_deref())
        }
        Command::Analyze { wav, f0, cal, window, out, format, no_warp, grid_step_hz, overrides } => {
            let analysis = Analysis::resolve(&overrides, &file)?;
            let window = single_window(window.or(file.window.clone()))?;
            if !(grid_step_hz > 0.0 && grid_step_hz.is_finite()) {
                return Err(UsageError(format!("grid step out of range: {grid_step_hz}")).into());
            }
            let format = format.or(file.format).unwrap_or_else(|| format_from_extension(&out));
            let job = AnalyzeJob { wav, f0, cal, window, analysis, warp: !no_warp, grid_step_hz };
            cmd_analyze(&job, format, &out)
        }
        Command::Ifgram { wav, window, format, out, max_freq, overrides } => {
            let analysis = Analysis::resolve(&overrides, &file)?;
            let window = single_window(window.or(file.window.clone()))?;
            if !(max_freq > 0.0) {
                return Err(UsageError(format!("max frequency out of range: {max_freq}")).into());
            }
            cmd_ifgram(&wav, window, &analysis, format.or(file.format).unwrap_or(Format::Csv), max_freq, out.as_deref())
        }
    }
}

fn single_window(spec: Option<String>) -> anyhow::Result<WindowKind> {
    let Some(spec) = spec else {
        return Ok(WindowKind::SixTerm);
    };
    match parse_windows(&spec)?.as_slice() {
        [k] => Ok(*k),
        _ => Err(UsageError(format!("expected a single window, got {spec:?}")).into()),
    }
}

fn format_from_extension(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    }
}

/// Shortest round-trip text for a value, empty when not finite.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn window_info(
    kinds: &[WindowKind],
    format: Format,
    oversample: usize,
    curves: Option<&Path>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    if oversample < 16 {
        return Err(UsageError(format!("oversample must be at least 16, got {oversample}")).into());
    }
    let config = json!({
        "command": "window-info",
        "windows": kinds.iter().map(|k| k.name()).collect::<Vec<_>>(),
        "oversample": oversample,
    });
    let metrics = kinds
        .iter()
        .map(|&k| window_metrics(k, oversample))
        .collect::<ifsnr::Result<Vec<_>>>()?;

    let mut w = output::open(out)?;
    match format {
        Format::Csv => {
            csv_header(
                &mut w,
                output::SCHEMA_WINDOW_INFO,
                &config,
                &[
                    "kind",
                    "max_sidelobe_db",
                    "decay_rate_db_per_oct",
                    "nominal_length",
                    "measured_first_null",
                    "sigma_t",
                    "sigma_f",
                    "sigma_t_ratio",
                    "sigma_f_ratio",
                ],
            )?;
            for m in &metrics {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    m.kind,
                    num(m.max_sidelobe_db),
                    num(m.decay_rate_db_per_oct),
                    num(m.nominal_length),
                    num(m.measured_first_null),
                    num(m.sigma_t),
                    num(m.sigma_f),
                    num(m.sigma_t_ratio),
                    num(m.sigma_f_ratio)
                )?;
            }
        }
        Format::Json => {
            let mut body = Map::new();
            body.insert("windows".into(), serde_json::to_value(&metrics)?);
            write_json(&mut w, &json_document(output::SCHEMA_WINDOW_INFO, &config, body))?;
        }
    }
    w.flush()?;

    if let Some(path) = curves {
        let mut c = output::open(Some(path))?;
        csv_header(&mut c, output::SCHEMA_WINDOW_CURVES, &config, &["kind", "curve", "x", "value"])?;
        for &k in kinds {
            for (x, v) in window_shape_curve(k, 513)? {
                writeln!(c, "{k},shape,{},{}", num(x), num(v))?;
            }
            for (x, v) in window_gain_curve(k, oversample, 20.0)? {
                writeln!(c, "{k},gain,{},{}", num(x), num(v))?;
            }
        }
        c.flush()?;
    }
    Ok(())
}

/// Settings shared by `calibrate` and `simulate`.
struct SweepJob {
    windows: Vec<WindowKind>,
    profile: Profile,
    spec: TestSignalSpec,
    sweep: SweepConfig,
    analysis: Analysis,
}

impl SweepJob {
    fn resolve(
        file: &FileConfig,
        window: Option<String>,
        profile: Option<Profile>,
        seed: Option<u64>,
        sample_rate: f64,
        overrides: &Overrides,
    ) -> anyhow::Result<Self> {
        let analysis = Analysis::resolve(overrides, file)?;
        let windows = parse_windows(window.as_deref().or(file.window.as_deref()).unwrap_or("six-term"))?;
        let profile = profile.or(file.profile).unwrap_or(Profile::Desk);
        if !(sample_rate > 2.0 * analysis.f_tgt && sample_rate.is_finite()) {
            return Err(UsageError(format!("sample rate out of range: {sample_rate}")).into());
        }
        let spec = TestSignalSpec {
            f0: analysis.f_tgt,
            sample_rate,
            rng_seed: seed.or(file.seed).unwrap_or(0),
            ..TestSignalSpec::default()
        };
        spec.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(SweepJob { windows, profile, spec, sweep: profile.sweep(analysis.fft_size), analysis })
    }

    fn config_value(&self, command: &str) -> Value {
        json!({
            "command": command,
            "windows": self.windows.iter().map(|k| k.name()).collect::<Vec<_>>(),
            "profile": self.profile,
            "seed": self.spec.rng_seed,
            "signal": self.spec,
            "snr_grid_db": self.sweep.snr_grid,
            "position_stride": self.sweep.position_stride,
            "harmonic_stride": self.sweep.harmonic_stride,
            "analysis": self.analysis,
        })
    }

    fn estimator(&self, window: WindowKind) -> EstimatorConfig {
        self.analysis.estimator(window, self.spec.sample_rate)
    }

    /// Uncalibrated distributions for one window over the SNR grid.
    fn run(&self, window: WindowKind) -> anyhow::Result<(EstimatorConfig, Vec<EstimateDistribution>)> {
        let config = self.estimator(window);
        let started = Instant::now();
        let dists = run_sweep(&self.spec, &self.sweep, &config, &self.sweep.snr_grid)?;
        log::info!(
            "{window}: {} estimates per SNR over {} SNRs in {:.1} s",
            self.sweep.count(&self.spec),
            self.sweep.snr_grid.len(),
            started.elapsed().as_secs_f64()
        );
        Ok((config, dists))
    }
}

fn cmd_calibrate(job: &SweepJob, anchor_snr: Option<f64>, out: &Path) -> anyhow::Result<()> {
    let mut entries = Vec::new();
    for &window in &job.windows {
        let (config, dists) = job.run(window)?;
        let c_eq = Estimator::new(config)?.constants().c_eq;
        let policy = match anchor_snr {
            Some(snr_db) => AnchorPolicy::Single { snr_db },
            None => AnchorPolicy::default_for(window),
        };
        let entry = calibrate(&dists, &config, c_eq, policy)?;
        log::info!("{window}: C0 = {:.6} ({})", entry.c0, entry.anchor);
        entries.push(entry);
    }
    let mut config = job.config_value("calibrate");
    config["anchor_snr_db"] = json!(anchor_snr);
    let mut body = Map::new();
    body.insert("entries".into(), serde_json::to_value(&entries)?);
    let mut w = output::open(Some(out))?;
    write_json(&mut w, &json_document(output::SCHEMA_CALIBRATION, &config, body))?;
    w.flush()?;
    Ok(())
}

/// Reads the calibration entries written by `calibrate`.
fn load_calibration(path: &Path) -> anyhow::Result<Vec<CalibrationConstant>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ifsnr::Error::Config(format!(
            "cannot read calibration table {}: {e}; create one with `ifsnr calibrate --out {}`",
            path.display(),
            path.display()
        ))
    })?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| ifsnr::Error::Config(format!("calibration table {}: {e}", path.display())))?;
    if doc.get("schema").and_then(Value::as_str) != Some(output::SCHEMA_CALIBRATION) {
        return Err(ifsnr::Error::Config(format!(
            "{} is not a calibration table (expected schema {})",
            path.display(),
            output::SCHEMA_CALIBRATION
        ))
        .into());
    }
    let entries = doc.get("entries").cloned().unwrap_or(Value::Null);
    Ok(serde_json::from_value(entries)
        .map_err(|e| ifsnr::Error::Config(format!("calibration table {}: {e}", path.display())))?)
}

/// The entry for `config.window` that matches the rest of `config`.
fn pick_calibration(
    table: &[CalibrationConstant],
    config: &EstimatorConfig,
    path: &Path,
) -> anyhow::Result<CalibrationConstant> {
    let Some(entry) = table.iter().find(|c| c.window == config.window) else {
        return Err(ifsnr::Error::Config(format!(
            "{} has no entry for window {}; run `ifsnr calibrate --window {}` with the same settings",
            path.display(),
            config.window,
            config.window
        ))
        .into());
    };
    entry.check_matches(config)?;
    Ok(entry.clone())
}

fn cmd_simulate(job: &SweepJob, cal: Option<&Path>, out: &Path, summary: Option<&Path>) -> anyhow::Result<()> {
    let table = cal.map(load_calibration).transpose()?;
    let mut calibrated = Vec::new();
    let mut c0s = Vec::new();
    for &window in &job.windows {
        let (config, dists) = job.run(window)?;
        let c0 = match (&table, cal) {
            (Some(t), Some(path)) => pick_calibration(t, &config, path)?.c0,
            _ => {
                let c_eq = Estimator::new(config)?.constants().c_eq;
                calibrate(&dists, &config, c_eq, AnchorPolicy::default_for(window))?.c0
            }
        };
        c0s.push((window, c0));
        calibrated.extend(dists.iter().map(|d| d.calibrated(c0)));
    }

    let mut config = job.config_value("simulate");
    config["calibration"] = json!(cal.map(|p| p.display().to_string()));
    config["c0"] = c0s.iter().map(|(k, c)| (k.name().to_string(), json!(c))).collect::<Map<_, _>>().into();

    let probs = cdf_probabilities();
    let mut w = output::open(Some(out))?;
    csv_header(&mut w, output::SCHEMA_SIMULATION, &config, &["window", "snr_true", "quantile_p", "value"])?;
    for d in &calibrated {
        for (p, v) in d.quantiles_at(&probs) {
            writeln!(w, "{},{},{},{}", d.window, num(d.snr_true), num(p), num(v))?;
        }
    }
    w.flush()?;

    if let Some(path) = summary {
        let mut s = output::open(Some(path))?;
        csv_header(
            &mut s,
            output::SCHEMA_SUMMARY,
            &config,
            &["window", "snr_true", "count", "median", "spread_99", "spread_iqr"],
        )?;
        for (row, d) in distribution_report(&calibrated)?.iter().zip(&calibrated) {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                row.window,
                num(row.snr_true),
                d.count,
                num(row.median),
                num(row.spread_99),
                num(row.spread_iqr)
            )?;
        }
        s.flush()?;
    }
    Ok(())
}

struct AnalyzeJob {
    wav: PathBuf,
    f0: PathBuf,
    cal: Option<PathBuf>,
    window: WindowKind,
    analysis: Analysis,
    warp: bool,
    grid_step_hz: f64,
}

fn cmd_analyze(job: &AnalyzeJob, format: Format, out: &Path) -> anyhow::Result<()> {
    let Some(cal_path) = job.cal.as_deref() else {
        return Err(ifsnr::Error::Config(
            "analyze needs a calibration table; create one with `ifsnr calibrate --window <kind> --out table.json` \
             and pass it with --cal"
                .into(),
        )
        .into());
    };
    let table = load_calibration(cal_path)?;
    let audio = read_wav(&job.wav).with_context(|| format!("reading {}", job.wav.display()))?;
    let track = read_f0_track_file(&job.f0).with_context(|| format!("reading {}", job.f0.display()))?;
    let estimator = job.analysis.estimator(job.window, audio.sample_rate);
    let cal = pick_calibration(&table, &estimator, cal_path)?;
    let settings = AnalysisSettings {
        estimator,
        frame_period: job.analysis.frame_period,
        warp: job.warp,
        ceiling_db: job.analysis.ceiling_db,
    };
    let started = Instant::now();
    let map = analyze_utterance(&audio.samples, audio.sample_rate, &track, &settings, &cal)?;
    log::info!(
        "{} frames analysed in {:.1} s",
        map.frames.len(),
        started.elapsed().as_secs_f64()
    );

    let config = json!({
        "command": "analyze",
        "wav": job.wav.display().to_string(),
        "f0": job.f0.display().to_string(),
        "calibration": cal_path.display().to_string(),
        "window": job.window.name(),
        "sample_rate": audio.sample_rate,
        "warp": job.warp,
        "c0": cal.c0,
        "analysis": job.analysis,
    });
    let mut w = output::open(Some(out))?;
    match format {
        Format::Csv => {
            csv_header(&mut w, output::SCHEMA_SNR_MAP, &config, &["time_s", "freq_hz", "snr_db"])?;
            for a in map.anchors() {
                writeln!(w, "{},{},{}", num(a.time_s), num(a.freq_hz), num(a.snr_db))?;
            }
        }
        Format::Json => {
            let top = map
                .frames
                .iter()
                .filter_map(|f| f.harmonic_freqs.last().copied())
                .fold(0.0f64, f64::max);
            let steps = (top / job.grid_step_hz).floor() as usize;
            let freqs: Vec<f64> = (1..=steps).map(|i| i as f64 * job.grid_step_hz).collect();
            let times = map.frame_times();
            let mut body = Map::new();
            body.insert("anchors".into(), serde_json::to_value(map.anchors())?);
            match interpolate_map(&map, &times, &freqs) {
                Ok(grid) => {
                    body.insert(
                        "grid".into(),
                        json!({
                            "times_s": grid.times,
                            "freqs_hz": grid.freqs,
                            "values": grid.values_or_null(),
                        }),
                    );
                }
                Err(e) => log::warn!("no dense grid written: {e}"),
            }
            write_json(&mut w, &json_document(output::SCHEMA_SNR_MAP, &config, body))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_ifgram(
    wav: &Path,
    window: WindowKind,
    analysis: &Analysis,
    format: Format,
    max_freq: f64,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let audio = read_wav(wav).with_context(|| format!("reading {}", wav.display()))?;
    let estimator = Estimator::new(analysis.estimator(window, audio.sample_rate))?;
    let mut analyzer = FrameAnalyzer::new(estimator.window().clone(), analysis.fft_size)?;
    let half = estimator.window().support_half_samples() as isize;
    let step = (analysis.frame_period * audio.sample_rate).round().max(1.0) as usize;
    let centers: Vec<isize> = (0..audio.samples.len())
        .step_by(step)
        .map(|c| c as isize)
        .filter(|&c| c - half >= 0 && c + half < audio.samples.len() as isize)
        .collect();
    if centers.is_empty() {
        return Err(ifsnr::Error::InvalidInput(format!(
            "{} is shorter than one {window} window",
            wav.display()
        ))
        .into());
    }
    let map = smoothed_if_map(
        &mut analyzer,
        &audio.samples,
        &centers,
        estimator.kernel(),
        estimator.config().power_floor,
    )?;
    let to_hz = 1.0 / (2.0 * std::f64::consts::PI);
    let bin_hz = map.bin_spacing * to_hz;
    let last_bin = ((max_freq / bin_hz).floor() as usize).min(analysis.fft_size / 2);

    let config = json!({
        "command": "ifgram",
        "wav": wav.display().to_string(),
        "window": window.name(),
        "sample_rate": audio.sample_rate,
        "max_freq_hz": max_freq,
        "analysis": analysis,
    });
    let mut w = output::open(out)?;
    match format {
        Format::Csv => {
            csv_header(&mut w, output::SCHEMA_IFGRAM, &config, &["time_s", "bin_hz", "if_hz", "weight"])?;
            for f in &map.frames {
                for k in 0..=last_bin {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        num(f.center_time),
                        num(k as f64 * bin_hz),
                        num(f.omega_is[k] * to_hz),
                        num(f.weight[k])
                    )?;
                }
            }
        }
        Format::Json => {
            let frames: Vec<Value> = map
                .frames
                .iter()
                .map(|f| {
                    let if_hz: Vec<Option<f64>> = f.omega_is[..=last_bin]
                        .iter()
                        .map(|v| v.is_finite().then_some(v * to_hz))
                        .collect();
                    json!({ "time_s": f.center_time, "if_hz": if_hz })
                })
                .collect();
            let mut body = Map::new();
            body.insert("bin_spacing_hz".into(), json!(bin_hz));
            body.insert("frames".into(), Value::Array(frames));
            write_json(&mut w, &json_document(output::SCHEMA_IFGRAM, &config, body))?;
        }
    }
    w.flush()?;
    Ok(())
}
