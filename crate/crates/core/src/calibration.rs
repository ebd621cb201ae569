//! Pulse-train simulation, C0 calibration and distribution statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snr_index::{CalibrationConstant, Estimator, EstimatorConfig};
use crate::windows::WindowKind;

/// Probabilities reported for every condition.
pub const QUANTILE_PROBS: [f64; 5] = [0.005, 0.25, 0.5, 0.75, 0.995];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSignalSpec {
    pub f0: f64,
    pub sample_rate: f64,
    /// `f64::INFINITY` for a noise-free signal.
    pub snr_db: f64,
    pub duration: f64,
    pub rng_seed: u64,
}

impl Default for TestSignalSpec {
    fn default() -> Self {
        TestSignalSpec {
            f0: 100.0,
            sample_rate: 44100.0,
            snr_db: f64::INFINITY,
            duration: 0.2,
            rng_seed: 0,
        }
    }
}

impl TestSignalSpec {
    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn period_samples(&self) -> usize {
        (self.sample_rate / self.f0).round() as usize
    }

    pub fn len(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Harmonics n = 1..=N kept one f0 clear of Nyquist.
    pub fn harmonic_count(&self) -> usize {
        ((self.sample_rate / 2.0 - self.f0) / self.f0).floor().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.sample_rate > 2.0 * self.f0) {
            return Err(Error::InvalidSpec(format!(
                "need 0 < 2 f0 < fs, got f0 = {}, fs = {}",
                self.f0, self.sample_rate
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidSpec(format!("bad duration {}", self.duration)));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidSpec(format!("bad snr {}", self.snr_db)));
        }
        Ok(())
    }
}

/// Which window positions and harmonics a condition covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub fft_size: usize,
    pub position_stride: usize,
    pub harmonic_stride: usize,
    pub snr_grid: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::full()
    }
}

impl SweepConfig {
    /// Every position in a cycle and every harmonic.
    pub fn full() -> Self {
        SweepConfig {
            fft_size: 32768,
            position_stride: 1,
            harmonic_stride: 1,
            snr_grid: (0..=8).map(|i| 10.0 * i as f64).collect(),
        }
    }

    /// Stride-reduced sweep: 41 positions by 22 harmonics at the defaults.
    pub fn desk() -> Self {
        SweepConfig {
            position_stride: 11,
            harmonic_stride: 10,
            ..SweepConfig::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.position_stride == 0 || self.harmonic_stride == 0 {
            return Err(Error::InvalidSpec("strides must be at least 1".into()));
        }
        if self.snr_grid.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidSpec("snr grid contains NaN".into()));
        }
        Ok(())
    }

    pub fn positions(&self, spec: &TestSignalSpec) -> Vec<usize> {
        (0..spec.period_samples()).step_by(self.position_stride).collect()
    }

    pub fn harmonics(&self, spec: &TestSignalSpec) -> Vec<usize> {
        (1..=spec.harmonic_count()).step_by(self.harmonic_stride).collect()
    }

    /// Estimates per condition.
    pub fn count(&self, spec: &TestSignalSpec) -> usize {
        self.positions(spec).len() * self.harmonics(spec).len()
    }

    /// Estimator settings matching the test signal, with the given window.
    pub fn estimator_config(&self, spec: &TestSignalSpec, window: WindowKind) -> EstimatorConfig {
        EstimatorConfig {
            window,
            f_tgt: spec.f0,
            sample_rate: spec.sample_rate,
            fft_size: self.fft_size,
            ..EstimatorConfig::default()
        }
    }
}

/// Estimates for one window at one true SNR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateDistribution {
    pub window: WindowKind,
    pub snr_true: f64,
    pub count: usize,
    pub median_eta: f64,
    /// None until calibrated; estimates are then −20 log10(c0 η).
    pub c0: Option<f64>,
    /// (probability, estimate in dB) at [`QUANTILE_PROBS`].
    pub quantiles: Vec<(f64, f64)>,
    /// Estimates in dB, ordered by position then harmonic.
    pub estimates_db: Vec<f64>,
}

impl EstimateDistribution {
    fn from_etas(window: WindowKind, snr_true: f64, etas: &[f64]) -> Self {
        let estimates_db: Vec<f64> = etas.iter().map(|e| -20.0 * e.log10()).collect();
        let mut sorted_eta: Vec<f64> = etas.iter().copied().filter(|e| e.is_finite()).collect();
        sorted_eta.sort_by(f64::total_cmp);
        let mut d = EstimateDistribution {
            window,
            snr_true,
            count: etas.len(),
            median_eta: quantile_sorted(&sorted_eta, 0.5),
            c0: None,
            quantiles: Vec::new(),
            estimates_db,
        };
        d.quantiles = d.quantiles_at(&QUANTILE_PROBS);
        d
    }

    /// Same estimates expressed with calibration constant `c0`.
    pub fn calibrated(&self, c0: f64) -> Self {
        let shift = -20.0 * c0.log10() - self.c0.map_or(0.0, |c| -20.0 * c.log10());
        let mut d = self.clone();
        d.c0 = Some(c0);
        d.estimates_db.iter_mut().for_each(|v| *v += shift);
        d.quantiles.iter_mut().for_each(|(_, v)| *v += shift);
        d
    }

    /// Empirical quantiles of the dB estimates; non-finite estimates are ignored.
    pub fn quantiles_at(&self, probs: &[f64]) -> Vec<(f64, f64)> {
        let mut sorted: Vec<f64> = self.estimates_db.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        probs.iter().map(|&p| (p, quantile_sorted(&sorted, p))).collect()
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.quantiles
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| self.quantiles_at(&[p])[0].1)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

/// Linear-interpolation quantile of ascending data (type 7). NaN when empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Unit impulses at `round(k fs / f0)`.
pub fn pulse_train(spec: &TestSignalSpec) -> Vec<f64> {
    let len = spec.len();
    let mut s = vec![0.0; len];
    let mut k = 0usize;
    loop {
        let idx = (k as f64 * spec.sample_rate / spec.f0).round() as usize;
        if idx >= len {
            break;
        }
        s[idx] = 1.0;
        k += 1;
    }
    s
}

/// Adds white Gaussian noise scaled so that mean signal power over mean noise
/// power is `snr_db`. An infinite SNR returns the signal unchanged.
pub fn add_noise_at_snr(signal: &[f64], snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.to_vec());
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidSpec(format!("bad snr {snr_db}")));
    }
    let power = signal.iter().map(|v| v * v).sum::<f64>() / signal.len() as f64;
    if power == 0.0 {
        return Err(Error::InvalidInput("signal is all zero".into()));
    }
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(signal
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sigma * z
        })
        .collect())
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Noise seed for one (condition, position) work item.
pub fn item_seed(seed: u64, snr_db: f64, position: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ snr_db.to_bits()) ^ position as u64)
}

/// Estimates for one true SNR, using the window from `window`.
pub fn run_condition(spec: &TestSignalSpec, sweep: &SweepConfig, window: WindowKind) -> Result<EstimateDistribution> {
    let config = sweep.estimator_config(spec, window);
    Ok(run_sweep(spec, sweep, &config, &[spec.snr_db])?.remove(0))
}

/// Runs every SNR in `snrs` with the given estimator settings. Work items are
/// spread over the rayon pool; results do not depend on the thread count.
pub fn run_sweep(
    spec: &TestSignalSpec,
    sweep: &SweepConfig,
    config: &EstimatorConfig,
    snrs: &[f64],
) -> Result<Vec<EstimateDistribution>> {
    spec.validate()?;
    sweep.validate()?;
    if config.sample_rate != spec.sample_rate || config.fft_size != sweep.fft_size {
        return Err(Error::InvalidSpec(
            "estimator sample rate and fft size must match the sweep".into(),
        ));
    }
    let estimator = Estimator::new(*config)?;
    let support = estimator.support_half_samples();
    let period = spec.period_samples();
    let first = support.div_ceil(period) * period;
    if first + period + support > spec.len() {
        return Err(Error::InvalidSpec(format!(
            "test signal of {} samples too short for a window support of ±{support}",
            spec.len()
        )));
    }
    let clean = pulse_train(spec);
    let positions = sweep.positions(spec);
    let bins: Vec<usize> = sweep
        .harmonics(spec)
        .iter()
        .map(|&n| config.nearest_bin(n as f64 * spec.f0))
        .collect();

    let items: Vec<(usize, usize)> = (0..snrs.len())
        .flat_map(|i| positions.iter().map(move |&p| (i, p)))
        .collect();
    let etas: Vec<Vec<f64>> = items
        .par_iter()
        .map_init(
            || estimator.clone(),
            |est, &(i, p)| {
                let noisy = add_noise_at_snr(&clean, snrs[i], item_seed(spec.rng_seed, snrs[i], p))?;
                Ok(est.estimate(&noisy, (first + p) as isize, &bins)?.eta)
            },
        )
        .collect::<Result<_>>()?;

    Ok(snrs
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            let all: Vec<f64> = etas[i * positions.len()..(i + 1) * positions.len()]
                .iter()
                .flatten()
                .copied()
                .collect();
            EstimateDistribution::from_etas(config.window, snr, &all)
        })
        .collect())
}

/// How C0 is fitted from per-SNR medians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum AnchorPolicy {
    /// Least squares over true SNRs within `[lo_db, hi_db]`.
    LinearRange { lo_db: f64, hi_db: f64 },
    /// Exact match at a single true SNR.
    Single { snr_db: f64 },
}

impl AnchorPolicy {
    /// Range over which each window's median tracks the true SNR.
    pub fn default_for(kind: WindowKind) -> Self {
        let hi_db = match kind {
            WindowKind::Hanning => 10.0,
            WindowKind::Blackman => 30.0,
            WindowKind::Nuttall11 | WindowKind::Nuttall15 => 50.0,
            WindowKind::Kaiser | WindowKind::Dpss4 => 60.0,
            WindowKind::Dpss45 => 70.0,
            WindowKind::SixTerm => 80.0,
        };
        AnchorPolicy::LinearRange { lo_db: 0.0, hi_db }
    }

    pub fn describe(&self) -> String {
        match self {
            AnchorPolicy::LinearRange { lo_db, hi_db } => format!("least-squares {lo_db}..{hi_db} dB"),
            AnchorPolicy::Single { snr_db } => format!("single {snr_db} dB"),
        }
    }
}

/// C0 from (true SNR, median η) pairs.
///
/// The least-squares solution of −20 log10(C0 m_s) ≈ s is the mean of
/// s + 20 log10 m_s over the selected points.
pub fn fit_c0(points: &[(f64, f64)], policy: AnchorPolicy) -> Result<f64> {
    if points.iter().any(|(_, m)| !(*m > 0.0 && m.is_finite())) {
        return Err(Error::Calibration("median η must be positive and finite".into()));
    }
    let chosen: Vec<(f64, f64)> = match policy {
        AnchorPolicy::LinearRange { lo_db, hi_db } => points
            .iter()
            .copied()
            .filter(|(s, _)| *s >= lo_db - 1e-9 && *s <= hi_db + 1e-9)
            .collect(),
        AnchorPolicy::Single { snr_db } => points
            .iter()
            .copied()
            .filter(|(s, _)| (*s - snr_db).abs() < 1e-9)
            .take(1)
            .collect(),
    };
    if chosen.is_empty() {
        return Err(Error::Calibration(format!(
            "no condition falls under {}",
            policy.describe()
        )));
    }
    let distinct_snr = chosen.iter().any(|(s, _)| *s != chosen[0].0);
    if distinct_snr && chosen.iter().all(|(_, m)| *m == chosen[0].1) {
        return Err(Error::Calibration("medians are identical across SNRs".into()));
    }
    let offset = chosen.iter().map(|(s, m)| s + 20.0 * m.log10()).sum::<f64>() / chosen.len() as f64;
    Ok(10f64.powf(-offset / 20.0))
}

/// Fits C0 for one window from its uncalibrated distributions.
pub fn calibrate(
    distributions: &[EstimateDistribution],
    config: &EstimatorConfig,
    c_eq: f64,
    policy: AnchorPolicy,
) -> Result<CalibrationConstant> {
    if let Some(d) = distributions.iter().find(|d| d.window != config.window) {
        return Err(Error::Calibration(format!(
            "distribution for {} passed with config for {}",
            d.window, config.window
        )));
    }
    let points: Vec<(f64, f64)> = distributions.iter().map(|d| (d.snr_true, d.median_eta)).collect();
    let c0 = fit_c0(&points, policy)?;
    Ok(CalibrationConstant {
        window: config.window,
        length_scale: config.length_scale,
        smoothing_width: config.smoothing_width,
        fft_size: config.fft_size,
        sample_rate: config.sample_rate,
        f_tgt: config.f_tgt,
        c_eq,
        c0,
        anchor: policy.describe(),
    })
}

/// Summary statistics for one condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub window: WindowKind,
    pub snr_true: f64,
    pub median: f64,
    /// 99.5% minus 0.5% point.
    pub spread_99: f64,
    /// 75% minus 25% point.
    pub spread_iqr: f64,
}

pub fn distribution_report(conditions: &[EstimateDistribution]) -> Result<Vec<ReportRow>> {
    if conditions.is_empty() {
        return Err(Error::InvalidInput("no conditions to report".into()));
    }
    Ok(conditions
        .iter()
        .map(|d| ReportRow {
            window: d.window,
            snr_true: d.snr_true,
            median: d.quantile(0.5),
            spread_99: d.quantile(0.995) - d.quantile(0.005),
            spread_iqr: d.quantile(0.75) - d.quantile(0.25),
        })
        .collect())
}

/// Probabilities at which empirical CDFs are tabulated: the reported
/// quantiles plus every percent.
pub fn cdf_probabilities() -> Vec<f64> {
    let mut p: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    p.extend(QUANTILE_PROBS);
    p.sort_by(f64::total_cmp);
    p.dedup();
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pulse_train_counts() {
        let spec = TestSignalSpec { duration: 1.0, ..TestSignalSpec::default() };
        let s = pulse_train(&spec);
        let idx: Vec<usize> = s.iter().enumerate().filter(|(_, v)| **v == 1.0).map(|(i, _)| i).collect();
        assert_eq!(idx.len(), 100);
        assert!(idx.windows(2).all(|w| w[1] - w[0] == 441));
        let power = s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        assert!((power - 100.0 / 44100.0).abs() < 1e-15);
    }

    #[test]
    fn pulse_train_spectrum_is_flat_at_harmonics() {
        let spec = TestSignalSpec { duration: 1.0, ..TestSignalSpec::default() };
        let s = pulse_train(&spec);
        for n in [1usize, 7, 50, 219] {
            let w = 2.0 * std::f64::consts::PI * n as f64 * 100.0 / 44100.0;
            let (re, im) = s.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, v)| {
                (re + v * (w * i as f64).cos(), im - v * (w * i as f64).sin())
            });
            assert!(((re * re + im * im).sqrt() - 100.0).abs() < 1e-8, "harmonic {n}");
        }
    }

    #[test]
    fn noise_power_matches_target() {
        let spec = TestSignalSpec { duration: 1.0, ..TestSignalSpec::default() };
        let s = pulse_train(&spec);
        let noisy = add_noise_at_snr(&s, 0.0, 11).unwrap();
        let ps = s.iter().map(|v| v * v).sum::<f64>();
        let pn = noisy.iter().zip(&s).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        assert!((10.0 * (ps / pn).log10()).abs() < 0.1);
        assert_eq!(noisy, add_noise_at_snr(&s, 0.0, 11).unwrap());
        assert_ne!(noisy, add_noise_at_snr(&s, 0.0, 12).unwrap());
        assert_eq!(add_noise_at_snr(&s, f64::INFINITY, 3).unwrap(), s);
        assert!(add_noise_at_snr(&[0.0; 10], 10.0, 1).is_err());
    }

    #[test]
    fn sweep_counts() {
        let spec = TestSignalSpec::default();
        assert_eq!(spec.harmonic_count(), 219);
        assert_eq!(SweepConfig::full().count(&spec), 96_579);
        let stride = SweepConfig { position_stride: 21, harmonic_stride: 10, ..SweepConfig::full() };
        assert_eq!(stride.count(&spec), 21 * 22);
        assert_eq!(SweepConfig::desk().count(&spec), 41 * 22);
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.25), 2.0);
        assert!((quantile_sorted(&v, 0.1) - 1.4).abs() < 1e-15);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert!(quantile_sorted(&[], 0.5).is_nan());
    }

    fn dist(values: &[f64]) -> EstimateDistribution {
        let etas: Vec<f64> = values.iter().map(|db| 10f64.powf(-db / 20.0)).collect();
        EstimateDistribution::from_etas(WindowKind::SixTerm, 40.0, &etas)
    }

    #[test]
    fn report_spreads() {
        let sym = dist(&[10.0, 20.0, 30.0, 40.0, 50.0]);
        let point = dist(&[7.0; 9]);
        let rows = distribution_report(&[sym, point]).unwrap();
        assert!((rows[0].spread_iqr - 2.0 * (rows[0].median - 20.0)).abs() < 1e-9);
        assert!((rows[0].median - 30.0).abs() < 1e-9);
        assert!(rows[1].spread_99.abs() < 1e-9 && rows[1].spread_iqr.abs() < 1e-9);
        assert!(distribution_report(&[]).is_err());
    }

    #[test]
    fn calibration_shift() {
        let d = dist(&[10.0, 20.0, 30.0]);
        let c = d.calibrated(0.1);
        assert!((c.median() - 40.0).abs() < 1e-9);
        let back = c.calibrated(1.0);
        assert!((back.median() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn single_anchor_closed_form() {
        let pts = [(20.0, 0.3), (40.0, 0.05)];
        let c0 = fit_c0(&pts, AnchorPolicy::Single { snr_db: 40.0 }).unwrap();
        assert!((c0 - 10f64.powf(-2.0) / 0.05).abs() < 1e-15);
        assert!(fit_c0(&pts, AnchorPolicy::Single { snr_db: 30.0 }).is_err());
    }

    #[test]
    fn degenerate_medians_rejected() {
        let pts = [(0.0, 0.2), (10.0, 0.2), (20.0, 0.2)];
        assert!(matches!(
            fit_c0(&pts, AnchorPolicy::LinearRange { lo_db: 0.0, hi_db: 80.0 }),
            Err(Error::Calibration(_))
        ));
    }

    proptest! {
        #[test]
        fn c0_is_scale_equivariant(
            medians in prop::collection::vec(1e-5f64..1.0, 9),
            g in 1e-3f64..1e3,
        ) {
            let pts: Vec<(f64, f64)> = medians.iter().enumerate().map(|(i, m)| (10.0 * i as f64, *m)).collect();
            let scaled: Vec<(f64, f64)> = pts.iter().map(|(s, m)| (*s, m * g)).collect();
            let policy = AnchorPolicy::LinearRange { lo_db: 0.0, hi_db: 80.0 };
            let a = fit_c0(&pts, policy).unwrap();
            let b = fit_c0(&scaled, policy).unwrap();
            prop_assert!((b * g / a - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sweep_is_deterministic_and_sized() {
        let spec = TestSignalSpec { rng_seed: 5, ..TestSignalSpec::default() };
        let sweep = SweepConfig { position_stride: 63, harmonic_stride: 40, fft_size: 16384, snr_grid: vec![20.0] };
        let cfg = sweep.estimator_config(&spec, WindowKind::Blackman);
        let a = run_sweep(&spec, &sweep, &cfg, &[20.0, 60.0]).unwrap();
        let b = run_sweep(&spec, &sweep, &cfg, &[20.0, 60.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].count, 7 * 6);
        assert!(a[0].median() < a[1].median());
    }

    #[test]
    fn short_signal_rejected() {
        let spec = TestSignalSpec { duration: 0.02, ..TestSignalSpec::default() };
        assert!(matches!(
            run_condition(&spec.with_snr(30.0), &SweepConfig::desk(), WindowKind::SixTerm),
            Err(Error::InvalidSpec(_))
        ));
    }
}
