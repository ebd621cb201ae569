//! Frequency and time-frequency derivatives of the smoothed IF map, their
//! scaling constants, and the mixed periodicity index η.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ifgram::{
    instantaneous_frequency, raised_cosine_kernel, smooth_if_at, smoothing_halfwidth_bins,
    FrameAnalyzer, SmoothedIFMap, DEFAULT_POWER_FLOOR,
};
use crate::windows::{sample_window, SampledWindow, WindowKind, WindowSpec, DEFAULT_LENGTH_SCALE};

/// SNR reported for η = 0.
pub const DEFAULT_CEILING_DB: f64 = 100.0;

/// Gauss-Legendre panels and nodes per panel for the scaling integrals.
const QUAD_PANELS: usize = 32;
const QUAD_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstants {
    /// Power-weighted mean of ω² over the main lobe, (rad/s)².
    pub c_delta_omega: f64,
    /// Power-weighted mean of ω⁴ over the main lobe, (rad/s)⁴.
    pub c_delta_omega_t: f64,
    /// `c_delta_omega / c_delta_omega_t`, s².
    pub c_eq: f64,
}

#[derive(Debug, Clone)]
pub struct MixedIndexFrame {
    pub center_time: f64,
    pub eta: Vec<f64>,
    pub d_omega: Vec<f64>,
    /// 1/s.
    pub d_omega_t: Vec<f64>,
}

/// Calibration constant C0 together with the configuration it is valid for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstant {
    pub window: WindowKind,
    pub length_scale: f64,
    pub smoothing_width: f64,
    pub fft_size: usize,
    pub sample_rate: f64,
    pub f_tgt: f64,
    pub c_eq: f64,
    pub c0: f64,
    /// How C0 was fitted, for the record.
    #[serde(default)]
    pub anchor: String,
}

impl CalibrationConstant {
    /// Checks that this constant was produced under `config`.
    pub fn check_matches(&self, config: &EstimatorConfig) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
        let mut bad = Vec::new();
        if self.window != config.window {
            bad.push(format!("window {} vs {}", self.window, config.window));
        }
        if !close(self.length_scale, config.length_scale) {
            bad.push(format!("length_scale {} vs {}", self.length_scale, config.length_scale));
        }
        if !close(self.smoothing_width, config.smoothing_width) {
            bad.push(format!(
                "smoothing_width {} vs {}",
                self.smoothing_width, config.smoothing_width
            ));
        }
        if self.fft_size != config.fft_size {
            bad.push(format!("fft_size {} vs {}", self.fft_size, config.fft_size));
        }
        if !close(self.sample_rate, config.sample_rate) {
            bad.push(format!("sample_rate {} vs {}", self.sample_rate, config.sample_rate));
        }
        if !close(self.f_tgt, config.f_tgt) {
            bad.push(format!("f_tgt {} vs {}", self.f_tgt, config.f_tgt));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "calibration does not match analysis: {}",
                bad.join(", ")
            )))
        }
    }
}

/// Central difference of ω_is over bins, one-sided at the spectrum edges.
pub fn frequency_derivative(map: &SmoothedIFMap, frame_index: usize) -> Result<Vec<f64>> {
    let frame = map.frames.get(frame_index).ok_or_else(|| {
        Error::InvalidInput(format!("frame {frame_index} not in map of {}", map.frames.len()))
    })?;
    Ok(bin_derivative(&frame.omega_is, map.bin_spacing))
}

fn bin_derivative(omega: &[f64], spacing: f64) -> Vec<f64> {
    let n = omega.len();
    (0..n)
        .map(|k| match k {
            _ if n < 2 => f64::NAN,
            0 => (omega[1] - omega[0]) / spacing,
            k if k == n - 1 => (omega[k] - omega[k - 1]) / spacing,
            k => (omega[k + 1] - omega[k - 1]) / (2.0 * spacing),
        })
        .collect()
}

/// Central time difference of the frequency derivative between the frames at
/// `t - dt/2` and `t + dt/2`, where `t` is the centre of `frame_index`.
pub fn time_frequency_derivative(map: &SmoothedIFMap, frame_index: usize, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidSpec(format!("dt must be positive, got {dt}")));
    }
    let t = map
        .frames
        .get(frame_index)
        .ok_or_else(|| Error::InvalidInput(format!("frame {frame_index} not in map")))?
        .center_time;
    let tol = 1e-3 * dt;
    let before = map.frame_near(t - dt / 2.0, tol).ok_or(Error::MissingPairedFrame(t - dt / 2.0))?;
    let after = map.frame_near(t + dt / 2.0, tol).ok_or(Error::MissingPairedFrame(t + dt / 2.0))?;
    let d0 = frequency_derivative(map, before)?;
    let d1 = frequency_derivative(map, after)?;
    let span = map.frames[after].center_time - map.frames[before].center_time;
    Ok(d0.iter().zip(&d1).map(|(a, b)| (b - a) / span).collect())
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Real transform of the centred, even window at angular frequency `omega`.
fn window_transform(window: &SampledWindow, omega: f64) -> f64 {
    let c = window.center_index;
    let step = omega / window.sample_rate();
    let tail: f64 = (1..=window.half_length_samples)
        .map(|n| window.samples[c + n] * (step * n as f64).cos())
        .sum();
    window.samples[c] + 2.0 * tail
}

fn scaling_integrals(window: &SampledWindow, omega_w: f64, panels: usize, nodes: usize) -> (f64, f64, f64) {
    let (x, w) = gauss_legendre(nodes);
    let width = omega_w / panels as f64;
    let (mut m0, mut m2, mut m4) = (0.0, 0.0, 0.0);
    for p in 0..panels {
        let a = p as f64 * width;
        for (xi, wi) in x.iter().zip(&w) {
            let om = a + 0.5 * width * (xi + 1.0);
            let g = window_transform(window, om).powi(2) * wi;
            m0 += g;
            m2 += g * om * om;
            m4 += g * om.powi(4);
        }
    }
    (m0, m2, m4)
}

/// Scaling constants from the window's power spectrum over (−ω_w, ω_w).
///
/// `fft_size` sets the bin spacing against which ω_w is checked.
pub fn scaling_constants(window: &SampledWindow, omega_w: f64, fft_size: usize) -> Result<ScalingConstants> {
    let bin = 2.0 * PI * window.sample_rate() / fft_size as f64;
    if !(omega_w >= bin) || !omega_w.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "omega_w = {omega_w} rad/s is smaller than one bin ({bin} rad/s)"
        )));
    }
    let (m0, m2, m4) = scaling_integrals(window, omega_w, QUAD_PANELS, QUAD_NODES);
    if !(m0 > 0.0 && m2 > 0.0 && m4 > 0.0) {
        return Err(Error::InvalidSpec("window has no power inside omega_w".into()));
    }
    let c_delta_omega = m2 / m0;
    let c_delta_omega_t = m4 / m0;
    Ok(ScalingConstants {
        c_delta_omega,
        c_delta_omega_t,
        c_eq: c_delta_omega / c_delta_omega_t,
    })
}

/// η = sqrt(d_omega² + c_eq d_omega_t²) per bin.
pub fn mixed_index(d_omega: &[f64], d_omega_t: &[f64], constants: &ScalingConstants) -> Result<Vec<f64>> {
    if d_omega.len() != d_omega_t.len() {
        return Err(Error::InvalidInput(format!(
            "derivative lengths differ: {} vs {}",
            d_omega.len(),
            d_omega_t.len()
        )));
    }
    Ok(d_omega
        .iter()
        .zip(d_omega_t)
        .map(|(a, b)| (a * a + constants.c_eq * b * b).sqrt())
        .collect())
}

/// −20 log10(c0 η), capped at `ceiling_db`.
pub fn eta_to_snr_db(eta: f64, c0: f64, ceiling_db: f64) -> f64 {
    if eta.is_nan() {
        return f64::NAN;
    }
    let db = -20.0 * (c0 * eta).log10();
    db.min(ceiling_db)
}

/// Analysis settings shared by calibration and speech analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub window: WindowKind,
    pub f_tgt: f64,
    pub sample_rate: f64,
    pub length_scale: f64,
    /// Kernel halfwidth as a fraction of f_tgt.
    pub smoothing_width: f64,
    pub fft_size: usize,
    /// Spacing of the paired frames for the time derivative, seconds.
    pub dt: f64,
    pub power_floor: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            window: WindowKind::SixTerm,
            f_tgt: 100.0,
            sample_rate: 44100.0,
            length_scale: DEFAULT_LENGTH_SCALE,
            smoothing_width: 0.30,
            fft_size: 32768,
            dt: 1e-3,
            power_floor: DEFAULT_POWER_FLOOR,
        }
    }
}

impl EstimatorConfig {
    pub fn with_window(mut self, window: WindowKind) -> Self {
        self.window = window;
        self
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec::new(self.window, self.f_tgt, self.sample_rate).with_length_scale(self.length_scale)
    }

    /// Offset of each paired frame from the centre, in samples; `dt` rounded
    /// to an even number of samples.
    pub fn half_step_samples(&self) -> usize {
        ((self.dt * self.sample_rate / 2.0).round() as usize).max(1)
    }

    /// Half-width of the smoothing kernel, rad/s.
    pub fn omega_w(&self) -> f64 {
        2.0 * PI * self.smoothing_width * self.f_tgt
    }

    pub fn validate(&self) -> Result<()> {
        self.window_spec().validate()?;
        if !(self.smoothing_width > 0.0 && self.smoothing_width.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "smoothing width must be positive, got {}",
                self.smoothing_width
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.power_floor >= 0.0 && self.power_floor < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "power floor must lie in [0, 1), got {}",
                self.power_floor
            )));
        }
        Ok(())
    }

    /// Bin nearest to `freq_hz`.
    pub fn nearest_bin(&self, freq_hz: f64) -> usize {
        (freq_hz * self.fft_size as f64 / self.sample_rate).round() as usize
    }
}

/// η, d_omega and d_omega_t at selected bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEstimates {
    pub eta: Vec<f64>,
    pub d_omega: Vec<f64>,
    pub d_omega_t: Vec<f64>,
}

/// Computes η at chosen bins from three frames around a centre sample.
///
/// Holds FFT scratch; clone one per worker.
#[derive(Clone)]
pub struct Estimator {
    config: EstimatorConfig,
    analyzer: FrameAnalyzer,
    kernel: Vec<f64>,
    constants: ScalingConstants,
}

impl Estimator {
    pub fn new(config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let window = sample_window(&config.window_spec())?;
        let constants = scaling_constants(&window, config.omega_w(), config.fft_size)?;
        let kernel = raised_cosine_kernel(smoothing_halfwidth_bins(
            config.smoothing_width,
            config.f_tgt,
            config.fft_size,
            config.sample_rate,
        ))?;
        let analyzer = FrameAnalyzer::new(window, config.fft_size)?;
        Ok(Estimator {
            config,
            analyzer,
            kernel,
            constants,
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    pub fn constants(&self) -> &ScalingConstants {
        &self.constants
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn window(&self) -> &SampledWindow {
        self.analyzer.window()
    }

    /// Samples needed on either side of a centre for a complete estimate.
    pub fn support_half_samples(&self) -> usize {
        self.window().support_half_samples() + self.config.half_step_samples()
    }

    fn d_omega_at(&mut self, signal: &[f64], center: isize, bins: &[usize]) -> Result<Vec<f64>> {
        let spectrum = self.analyzer.analyze(signal, center)?;
        let raw = instantaneous_frequency(&spectrum, self.config.power_floor);
        let last = spectrum.len() - 1;
        let mut needed = Vec::with_capacity(2 * bins.len());
        for &b in bins {
            if b > last {
                return Err(Error::InvalidInput(format!("bin {b} beyond spectrum")));
            }
            needed.push(b.saturating_sub(1).min(last.saturating_sub(1)));
            needed.push((b + 1).min(last).max(1));
        }
        let omega = smooth_if_at(&raw, &self.kernel, &needed)?;
        let spacing = self.analyzer.bin_spacing();
        Ok(bins
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                let span = if b == 0 || b == last { 1.0 } else { 2.0 };
                (omega[2 * i + 1] - omega[2 * i]) / (span * spacing)
            })
            .collect())
    }

    /// Estimates at `bins` for the frame centred on `center`.
    pub fn estimate(&mut self, signal: &[f64], center: isize, bins: &[usize]) -> Result<BinEstimates> {
        let h = self.config.half_step_samples() as isize;
        let before = self.d_omega_at(signal, center - h, bins)?;
        let d_omega = self.d_omega_at(signal, center, bins)?;
        let after = self.d_omega_at(signal, center + h, bins)?;
        let span = 2.0 * h as f64 / self.config.sample_rate;
        let d_omega_t: Vec<f64> = before.iter().zip(&after).map(|(a, b)| (b - a) / span).collect();
        let eta = mixed_index(&d_omega, &d_omega_t, &self.constants)?;
        Ok(BinEstimates { eta, d_omega, d_omega_t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifgram::{smoothed_if_map, SmoothedFrame};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map_of(omegas: Vec<Vec<f64>>, times: Vec<f64>, spacing: f64) -> SmoothedIFMap {
        SmoothedIFMap {
            frames: omegas
                .into_iter()
                .zip(times)
                .map(|(o, t)| SmoothedFrame {
                    center_time: t,
                    weight: vec![1.0; o.len()],
                    omega_is: o,
                })
                .collect(),
            kernel_halfwidth: 1.0,
            bin_spacing: spacing,
        }
    }

    #[test]
    fn identity_and_plateau_mappings() {
        let sp = 2.5;
        let ident: Vec<f64> = (0..40).map(|k| k as f64 * sp).collect();
        let map = map_of(vec![ident.clone(), vec![7.0; 40], ident], vec![0.0, 0.001, 0.002], sp);
        assert!(frequency_derivative(&map, 0).unwrap().iter().all(|d| (d - 1.0).abs() < 1e-12));
        assert!(frequency_derivative(&map, 1).unwrap().iter().all(|d| *d == 0.0));
        let dt = time_frequency_derivative(&map, 1, 0.002).unwrap();
        assert!(dt.iter().all(|d| d.abs() < 1e-9));
    }

    #[test]
    fn missing_pair_is_reported() {
        let map = map_of(vec![vec![0.0; 4]; 2], vec![0.0, 0.001], 1.0);
        assert!(matches!(
            time_frequency_derivative(&map, 1, 0.002),
            Err(Error::MissingPairedFrame(_))
        ));
    }

    #[test]
    fn mixed_index_forms() {
        let c = ScalingConstants { c_delta_omega: 4.0, c_delta_omega_t: 1.0, c_eq: 4.0 };
        assert_eq!(mixed_index(&[0.0], &[0.0], &c).unwrap(), vec![0.0]);
        assert_eq!(mixed_index(&[-0.3], &[0.0], &c).unwrap(), vec![0.3]);
        // sqrt(c_eq) * 0.5 == 1.0 == |d_omega|
        let e = mixed_index(&[1.0], &[0.5], &c).unwrap()[0];
        assert!((e - 2f64.sqrt()).abs() < 1e-15);
        assert!(mixed_index(&[1.0], &[], &c).is_err());
    }

    #[test]
    fn snr_conversion() {
        assert_eq!(eta_to_snr_db(1.0, 1.0, DEFAULT_CEILING_DB), 0.0);
        assert!((eta_to_snr_db(0.01, 1.0, DEFAULT_CEILING_DB) - 40.0).abs() < 1e-12);
        assert!((eta_to_snr_db(0.5, 0.02, DEFAULT_CEILING_DB) - 40.0).abs() < 1e-12);
        assert_eq!(eta_to_snr_db(0.0, 3.0, DEFAULT_CEILING_DB), DEFAULT_CEILING_DB);
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
        for n in [1, 2, 5, 8, 16] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((got - exact).abs() < 1e-13, "n {n} deg {deg}: {got}");
            }
        }
    }

    fn six_term(scale: f64) -> SampledWindow {
        sample_window(&WindowSpec::new(WindowKind::SixTerm, 100.0, 44100.0).with_length_scale(scale)).unwrap()
    }

    #[test]
    fn quadrature_is_converged() {
        let w = six_term(1.0);
        let ww = 2.0 * PI * 100.0;
        let (a0, a2, a4) = scaling_integrals(&w, ww, 32, 8);
        let (b0, b2, b4) = scaling_integrals(&w, ww, 64, 16);
        for (a, b) in [(a2 / a0, b2 / b0), (a4 / a0, b4 / b0)] {
            assert!((a / b - 1.0).abs() < 1e-6);
        }
        let c = scaling_constants(&w, ww, 32768).unwrap();
        assert!(c.c_delta_omega > 0.0 && c.c_delta_omega_t > 0.0);
        assert!((c.c_eq - c.c_delta_omega / c.c_delta_omega_t).abs() < 1e-18);
    }

    #[test]
    fn six_term_constants_pinned() {
        // Zero-padded FFT power spectrum, 64x oversampled, summed over |w| < 2 pi 100.
        let c = scaling_constants(&six_term(1.0), 2.0 * PI * 100.0, 32768).unwrap();
        assert!((c.c_delta_omega / 12680.420885660566 - 1.0).abs() < 1e-8);
        assert!((c.c_delta_omega_t / 467361957.44494593 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn dilation_rescales_constants() {
        let a = 2.0;
        let ww = 2.0 * PI * 30.0;
        let c1 = scaling_constants(&six_term(1.0), ww, 32768).unwrap();
        let c2 = scaling_constants(&six_term(a), ww / a, 32768).unwrap();
        assert!((c2.c_delta_omega * a * a / c1.c_delta_omega - 1.0).abs() < 1e-3);
        assert!((c2.c_delta_omega_t * a.powi(4) / c1.c_delta_omega_t - 1.0).abs() < 1e-3);
    }

    #[test]
    fn omega_w_below_one_bin_rejected() {
        let w = six_term(1.0);
        let bin = 2.0 * PI * 44100.0 / 32768.0;
        assert!(scaling_constants(&w, 0.9 * bin, 32768).is_err());
        assert!(scaling_constants(&w, 1.1 * bin, 32768).is_ok());
    }

    fn noisy_pulses(len: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|n| if n % 441 == 0 { 1.0 } else { 0.0 } + sigma * (rng.random::<f64>() - 0.5))
            .collect()
    }

    #[test]
    fn estimator_matches_three_frame_map() {
        let cfg = EstimatorConfig::default();
        let mut est = Estimator::new(cfg).unwrap();
        let sig = noisy_pulses(12000, 0.01, 4);
        let c = 6000isize;
        let h = cfg.half_step_samples() as isize;
        let bins: Vec<usize> = (1..200).step_by(7).map(|n| cfg.nearest_bin(100.0 * n as f64)).collect();
        let fast = est.estimate(&sig, c, &bins).unwrap();

        let mut an = FrameAnalyzer::new(est.window().clone(), cfg.fft_size).unwrap();
        let map = smoothed_if_map(&mut an, &sig, &[c - h, c, c + h], est.kernel(), cfg.power_floor).unwrap();
        let d = frequency_derivative(&map, 1).unwrap();
        let dt = time_frequency_derivative(&map, 1, 2.0 * h as f64 / cfg.sample_rate).unwrap();
        let eta = mixed_index(&d, &dt, est.constants()).unwrap();
        for (i, &b) in bins.iter().enumerate() {
            for (x, y) in [(fast.eta[i], eta[b]), (fast.d_omega[i], d[b]), (fast.d_omega_t[i], dt[b])] {
                assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-12), "bin {b}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn stationary_tone_has_no_time_derivative() {
        let cfg = EstimatorConfig::default();
        let mut est = Estimator::new(cfg).unwrap();
        let f = 1000.0;
        let sig: Vec<f64> = (0..12000).map(|n| (2.0 * PI * f * n as f64 / 44100.0).sin()).collect();
        let bin = cfg.nearest_bin(f);
        let e = est.estimate(&sig, 6000, &[bin]).unwrap();
        assert!(e.d_omega[0].abs() < 1e-6, "{}", e.d_omega[0]);
        assert!(e.d_omega_t[0].abs() < 1e-3, "{}", e.d_omega_t[0]);
    }

    #[test]
    fn calibration_mismatch_detected() {
        let cfg = EstimatorConfig::default();
        let mut cal = CalibrationConstant {
            window: cfg.window,
            length_scale: cfg.length_scale,
            smoothing_width: cfg.smoothing_width,
            fft_size: cfg.fft_size,
            sample_rate: cfg.sample_rate,
            f_tgt: cfg.f_tgt,
            c_eq: 1.0,
            c0: 1.0,
            anchor: String::new(),
        };
        assert!(cal.check_matches(&cfg).is_ok());
        cal.fft_size = 16384;
        assert!(matches!(cal.check_matches(&cfg), Err(Error::Config(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]
        #[test]
        fn eta_is_amplitude_invariant_and_bounds_d_omega(gain in 1e-3f64..1e3, seed in 0u64..1000) {
            let cfg = EstimatorConfig { fft_size: 16384, ..EstimatorConfig::default() }
                .with_window(WindowKind::Blackman);
            let mut est = Estimator::new(cfg).unwrap();
            let sig = noisy_pulses(8000, 0.05, seed);
            let scaled: Vec<f64> = sig.iter().map(|v| v * gain).collect();
            let bins: Vec<usize> = [3, 17, 50].iter().map(|n| cfg.nearest_bin(100.0 * *n as f64)).collect();
            let a = est.estimate(&sig, 4000, &bins).unwrap();
            let b = est.estimate(&scaled, 4000, &bins).unwrap();
            for i in 0..bins.len() {
                prop_assert!((a.eta[i] - b.eta[i]).abs() <= 1e-7 * a.eta[i]);
                prop_assert!(a.eta[i] >= a.d_omega[i].abs());
                let lhs = a.eta[i].powi(2);
                let rhs = a.d_omega[i].powi(2) + est.constants().c_eq * a.d_omega_t[i].powi(2);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300));
            }
        }
    }
}
