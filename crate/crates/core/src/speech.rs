//! Harmonic SNR maps of real utterances.
//!
//! The signal is resampled onto a warped time axis on which its fundamental
//! is constant at `f_tgt`. Every analysis frame then reads η at the same
//! harmonic bins, and the estimates are relocated to the original
//! time-frequency coordinates.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::snr_index::{eta_to_snr_db, CalibrationConstant, Estimator, EstimatorConfig, DEFAULT_CEILING_DB};
use crate::windows::kaiser_shape;

/// Half-width of the resampling kernel in input samples at full bandwidth.
const RESAMPLE_HALF_TAPS: f64 = 32.0;
const RESAMPLE_BETA: f64 = 9.0;

/// Adjacent voiced f0 values further apart than this ratio are reported.
const OCTAVE_JUMP_RATIO: f64 = 1.8;

#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    pub times: Vec<f64>,
    pub f0: Vec<f64>,
    pub voiced: Vec<bool>,
}

impl F0Track {
    pub fn new(times: Vec<f64>, f0: Vec<f64>, voiced: Vec<bool>) -> Result<Self> {
        if times.len() != f0.len() || times.len() != voiced.len() {
            return Err(Error::InvalidInput(format!(
                "f0 track columns differ in length: {}, {}, {}",
                times.len(),
                f0.len(),
                voiced.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::InvalidInput("empty f0 track".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("f0 track times must be finite and strictly increasing".into()));
        }
        if let Some(i) = (0..f0.len()).find(|&i| voiced[i] && !(f0[i] > 0.0 && f0[i].is_finite())) {
            return Err(Error::InvalidInput(format!(
                "voiced f0 at t = {} is {}",
                times[i], f0[i]
            )));
        }
        let track = F0Track { times, f0, voiced };
        track.warn_on_jumps();
        Ok(track)
    }

    /// Voiced track at a fixed f0.
    pub fn constant(f0: f64, duration: f64, step: f64) -> Result<Self> {
        let n = (duration / step).floor() as usize + 1;
        let times = (0..n).map(|i| i as f64 * step).collect();
        F0Track::new(times, vec![f0; n], vec![true; n])
    }

    fn warn_on_jumps(&self) {
        let voiced: Vec<usize> = (0..self.f0.len()).filter(|&i| self.voiced[i]).collect();
        for w in voiced.windows(2) {
            let (a, b) = (self.f0[w[0]], self.f0[w[1]]);
            if w[1] == w[0] + 1 && (a / b > OCTAVE_JUMP_RATIO || b / a > OCTAVE_JUMP_RATIO) {
                log::warn!(
                    "f0 jumps from {a:.1} Hz to {b:.1} Hz at t = {:.4} s; passed through unchanged",
                    self.times[w[1]]
                );
            }
        }
    }

    pub fn any_voiced(&self) -> bool {
        self.voiced.iter().any(|&v| v)
    }

    /// Voicing of the track point nearest `t`; false outside the track.
    pub fn is_voiced_at(&self, t: f64) -> bool {
        if t < self.times[0] || t > *self.times.last().unwrap() {
            return false;
        }
        self.voiced[self.nearest_index(t)]
    }

    fn nearest_index(&self, t: f64) -> usize {
        let i = self.times.partition_point(|&x| x < t);
        if i == 0 {
            0
        } else if i == self.times.len() {
            i - 1
        } else if t - self.times[i - 1] <= self.times[i] - t {
            i - 1
        } else {
            i
        }
    }

    /// f0 with every unvoiced point replaced by its nearest voiced neighbour.
    pub fn filled(&self) -> Result<Vec<f64>> {
        let voiced: Vec<usize> = (0..self.f0.len()).filter(|&i| self.voiced[i]).collect();
        if voiced.is_empty() {
            return Err(Error::NoVoicing);
        }
        Ok((0..self.f0.len())
            .map(|i| {
                if self.voiced[i] {
                    return self.f0[i];
                }
                let j = voiced.partition_point(|&v| v < i);
                let best = match (j.checked_sub(1).map(|k| voiced[k]), voiced.get(j).copied()) {
                    (Some(a), Some(b)) => {
                        if self.times[i] - self.times[a] <= self.times[b] - self.times[i] {
                            a
                        } else {
                            b
                        }
                    }
                    (Some(a), None) => a,
                    (None, Some(b)) => b,
                    (None, None) => unreachable!(),
                };
                self.f0[best]
            })
            .collect())
    }

    /// Piecewise-linear f0 over the filled track, held constant past its ends.
    pub fn sampler(&self) -> Result<F0Sampler<'_>> {
        Ok(F0Sampler {
            times: &self.times,
            f0: self.filled()?,
        })
    }
}

pub struct F0Sampler<'a> {
    times: &'a [f64],
    f0: Vec<f64>,
}

impl F0Sampler<'_> {
    pub fn at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            return self.f0[0];
        }
        if i == self.times.len() {
            return self.f0[i - 1];
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let a = (t - t0) / (t1 - t0);
        self.f0[i - 1] + a * (self.f0[i] - self.f0[i - 1])
    }
}

/// Monotone piecewise-linear map between original time `t` and warped time
/// `tau`, extended linearly past both ends.
#[derive(Debug, Clone)]
pub struct TimeMap {
    t: Vec<f64>,
    tau: Vec<f64>,
}

fn interp_monotone(x: &[f64], y: &[f64], q: f64) -> f64 {
    let n = x.len();
    if n == 1 {
        return y[0] + (q - x[0]);
    }
    let i = x.partition_point(|&v| v <= q).clamp(1, n - 1);
    let (x0, x1, y0, y1) = (x[i - 1], x[i], y[i - 1], y[i]);
    y0 + (q - x0) * (y1 - y0) / (x1 - x0)
}

impl TimeMap {
    pub fn identity(len: usize, sample_rate: f64) -> Self {
        let t: Vec<f64> = (0..len.max(1)).map(|n| n as f64 / sample_rate).collect();
        TimeMap { tau: t.clone(), t }
    }

    pub fn tau_of_t(&self, t: f64) -> f64 {
        interp_monotone(&self.t, &self.tau, t)
    }

    pub fn t_of_tau(&self, tau: f64) -> f64 {
        interp_monotone(&self.tau, &self.t, tau)
    }

    /// dτ/dt on the segment containing `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        let n = self.t.len();
        if n < 2 {
            return 1.0;
        }
        let i = self.t.partition_point(|&v| v <= t).clamp(1, n - 1);
        (self.tau[i] - self.tau[i - 1]) / (self.t[i] - self.t[i - 1])
    }
}

#[derive(Debug, Clone)]
pub struct WarpedSignal {
    /// Samples of u(τ) at τ = m / sample_rate.
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub map: TimeMap,
}

impl WarpedSignal {
    /// The signal on its own time axis.
    pub fn identity(signal: &[f64], sample_rate: f64) -> Self {
        WarpedSignal {
            samples: signal.to_vec(),
            sample_rate,
            map: TimeMap::identity(signal.len(), sample_rate),
        }
    }

    pub fn tau_of_t(&self, t: f64) -> f64 {
        self.map.tau_of_t(t)
    }

    pub fn t_of_tau(&self, tau: f64) -> f64 {
        self.map.t_of_tau(tau)
    }
}

/// Band-limited value of `x` at fractional index `pos`, low-passed to
/// `cutoff` times the Nyquist rate.
fn resample_at(x: &[f64], pos: f64, cutoff: f64) -> f64 {
    let support = RESAMPLE_HALF_TAPS / cutoff;
    let lo = (pos - support).ceil().max(0.0) as usize;
    let hi = ((pos + support).floor() as isize).min(x.len() as isize - 1);
    if hi < lo as isize {
        return 0.0;
    }
    let mut acc = 0.0;
    for (n, &v) in x.iter().enumerate().take(hi as usize + 1).skip(lo) {
        let d = pos - n as f64;
        let arg = std::f64::consts::PI * cutoff * d;
        let sinc = if arg.abs() < 1e-12 { 1.0 } else { arg.sin() / arg };
        acc += v * cutoff * sinc * kaiser_shape(RESAMPLE_BETA, d / support);
    }
    acc
}

/// Resamples `signal` so that its fundamental sits at `f_tgt` throughout.
///
/// Warped time runs at rate f0(t)/f_tgt; unvoiced stretches take the f0 of
/// the nearest voiced track point.
pub fn time_warp(signal: &[f64], sample_rate: f64, track: &F0Track, f_tgt: f64) -> Result<WarpedSignal> {
    if signal.is_empty() {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    if !(f_tgt > 0.0 && f_tgt.is_finite()) {
        return Err(Error::InvalidSpec(format!("f_tgt must be positive, got {f_tgt}")));
    }
    let sampler = track.sampler()?;
    let fs = sample_rate;
    let rates: Vec<f64> = (0..signal.len()).map(|n| sampler.at(n as f64 / fs) / f_tgt).collect();
    let mut tau = Vec::with_capacity(signal.len());
    let mut acc = 0.0;
    tau.push(0.0);
    for n in 1..signal.len() {
        acc += 0.5 * (rates[n - 1] + rates[n]) / fs;
        tau.push(acc);
    }
    let map = TimeMap {
        t: (0..signal.len()).map(|n| n as f64 / fs).collect(),
        tau,
    };
    let out_len = (acc * fs + 1e-6).floor() as usize + 1;
    let samples: Vec<f64> = (0..out_len)
        .into_par_iter()
        .map(|m| {
            let t = map.t_of_tau(m as f64 / fs);
            let cutoff = map.rate_at(t).min(1.0);
            resample_at(signal, t * fs, cutoff)
        })
        .collect();
    Ok(WarpedSignal {
        samples,
        sample_rate: fs,
        map,
    })
}

/// SNR estimates at the harmonics of one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrFrame {
    /// Original (unwarped) frame time, s.
    pub time: f64,
    pub f0: f64,
    /// n f0 for n = 1..=N, Hz.
    pub harmonic_freqs: Vec<f64>,
    pub snr_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrMap {
    pub frames: Vec<SnrFrame>,
    pub frame_period: f64,
}

/// Anchor row in original coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anchor {
    pub time_s: f64,
    pub freq_hz: f64,
    pub snr_db: f64,
}

impl SnrMap {
    pub fn anchors(&self) -> Vec<Anchor> {
        self.frames
            .iter()
            .flat_map(|f| {
                f.harmonic_freqs.iter().zip(&f.snr_db).map(move |(&freq_hz, &snr_db)| Anchor {
                    time_s: f.time,
                    freq_hz,
                    snr_db,
                })
            })
            .collect()
    }

    pub fn frame_times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }
}

/// Time-by-frequency grid, row-major over time. NaN marks undefined cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrid {
    pub times: Vec<f64>,
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
}

impl DenseGrid {
    pub fn at(&self, ti: usize, fi: usize) -> f64 {
        self.values[ti * self.freqs.len() + fi]
    }

    /// Values with undefined cells as `None`, for JSON output.
    pub fn values_or_null(&self) -> Vec<Option<f64>> {
        self.values.iter().map(|v| v.is_finite().then_some(*v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisSettings {
    pub estimator: EstimatorConfig,
    /// Spacing of analysis frames on the original time axis, s.
    pub frame_period: f64,
    /// False analyses the signal on its own time axis.
    pub warp: bool,
    pub ceiling_db: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            estimator: EstimatorConfig::default(),
            frame_period: 0.005,
            warp: true,
            ceiling_db: DEFAULT_CEILING_DB,
        }
    }
}

/// Largest harmonic index kept one fundamental clear of Nyquist.
fn harmonic_limit(sample_rate: f64, f0: f64) -> usize {
    ((sample_rate / 2.0 - f0) / f0).floor().max(0.0) as usize
}

/// Harmonic SNR map of an utterance.
pub fn analyze_utterance(
    signal: &[f64],
    sample_rate: f64,
    track: &F0Track,
    settings: &AnalysisSettings,
    cal: &CalibrationConstant,
) -> Result<SnrMap> {
    let config = settings.estimator;
    if (config.sample_rate - sample_rate).abs() > 1e-9 * sample_rate {
        return Err(Error::Config(format!(
            "signal sampled at {sample_rate} Hz but analysis configured for {} Hz",
            config.sample_rate
        )));
    }
    cal.check_matches(&config)?;
    if !(settings.frame_period > 0.0 && settings.frame_period.is_finite()) {
        return Err(Error::InvalidSpec(format!("bad frame period {}", settings.frame_period)));
    }
    if !track.any_voiced() {
        return Err(Error::NoVoicing);
    }
    let warped = if settings.warp {
        time_warp(signal, sample_rate, track, config.f_tgt)?
    } else {
        WarpedSignal::identity(signal, sample_rate)
    };
    let sampler = track.sampler()?;
    let estimator = Estimator::new(config)?;
    let support = estimator.support_half_samples() as isize;
    let end = (signal.len() as f64 / sample_rate).min(*track.times.last().unwrap());

    struct Job {
        time: f64,
        f0: f64,
        center: isize,
    }
    let mut jobs = Vec::new();
    let mut skipped = 0usize;
    let mut k = 0usize;
    loop {
        let t = k as f64 * settings.frame_period;
        if t > end {
            break;
        }
        k += 1;
        if !track.is_voiced_at(t) {
            continue;
        }
        let center = (warped.tau_of_t(t) * sample_rate).round() as isize;
        if center - support < 0 || center + support >= warped.samples.len() as isize {
            skipped += 1;
            continue;
        }
        jobs.push(Job { time: t, f0: sampler.at(t), center });
    }
    if skipped > 0 {
        log::warn!("{skipped} voiced frames skipped: analysis window extends past the signal");
    }

    let ceiling = settings.ceiling_db;
    let frames: Vec<Option<SnrFrame>> = jobs
        .par_iter()
        .map_init(
            || estimator.clone(),
            |est, job| {
                let mut count = harmonic_limit(sample_rate, job.f0);
                if settings.warp {
                    count = count.min(harmonic_limit(sample_rate, config.f_tgt));
                }
                if count == 0 {
                    return Ok(None);
                }
                let read_at = if settings.warp { config.f_tgt } else { job.f0 };
                let bins: Vec<usize> = (1..=count).map(|n| config.nearest_bin(n as f64 * read_at)).collect();
                let eta = est.estimate(&warped.samples, job.center, &bins)?.eta;
                Ok(Some(SnrFrame {
                    time: job.time,
                    f0: job.f0,
                    harmonic_freqs: (1..=count).map(|n| n as f64 * job.f0).collect(),
                    snr_db: eta.iter().map(|&e| eta_to_snr_db(e, cal.c0, ceiling)).collect(),
                }))
            },
        )
        .collect::<Result<_>>()?;
    Ok(SnrMap {
        frames: frames.into_iter().flatten().collect(),
        frame_period: settings.frame_period,
    })
}

fn value_in_frame(frame: &SnrFrame, f: f64) -> f64 {
    let fr = &frame.harmonic_freqs;
    let v = &frame.snr_db;
    if f <= fr[0] {
        return v[0];
    }
    if f >= fr[fr.len() - 1] {
        return v[v.len() - 1];
    }
    let i = fr.partition_point(|&x| x <= f);
    let a = (f - fr[i - 1]) / (fr[i] - fr[i - 1]);
    v[i - 1] + a * (v[i] - v[i - 1])
}

/// Bilinear interpolation of the anchors onto a grid: linear in frequency
/// within a frame, nearest anchor beyond the first and last harmonic, then
/// linear in time between neighbouring frames. Times outside the analysed
/// frames, or inside a gap longer than 1.5 frame periods, are undefined.
pub fn interpolate_map(map: &SnrMap, times: &[f64], freqs: &[f64]) -> Result<DenseGrid> {
    if map.frames.len() < 2 {
        return Err(Error::InvalidInput("need at least two analysed frames".into()));
    }
    if map.frames.iter().any(|f| f.harmonic_freqs.len() < 2) {
        return Err(Error::InvalidInput("every frame needs at least two harmonics".into()));
    }
    let ft = map.frame_times();
    let tol = 1e-9 * map.frame_period.max(1.0);
    let max_gap = 1.5 * map.frame_period;
    let mut values = Vec::with_capacity(times.len() * freqs.len());
    for &t in times {
        let i = ft.partition_point(|&x| x < t - tol);
        let row: Vec<f64> = if i < ft.len() && (ft[i] - t).abs() <= tol {
            freqs.iter().map(|&f| value_in_frame(&map.frames[i], f)).collect()
        } else if i == 0 || i == ft.len() || ft[i] - ft[i - 1] > max_gap {
            vec![f64::NAN; freqs.len()]
        } else {
            let a = (t - ft[i - 1]) / (ft[i] - ft[i - 1]);
            freqs
                .iter()
                .map(|&f| {
                    let lo = value_in_frame(&map.frames[i - 1], f);
                    let hi = value_in_frame(&map.frames[i], f);
                    lo + a * (hi - lo)
                })
                .collect()
        };
        values.extend(row);
    }
    Ok(DenseGrid {
        times: times.to_vec(),
        freqs: freqs.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifgram::{instantaneous_frequency, FrameAnalyzer};
    use crate::windows::{sample_window, WindowKind, WindowSpec};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const FS: f64 = 44100.0;

    fn vibrato_f0(t: f64) -> f64 {
        100.0 * (1.0 + 0.05 * (2.0 * PI * 5.0 * t).sin())
    }

    /// Harmonic complex following `f0`, with phase integrated analytically
    /// for the vibrato law.
    fn vibrato_signal(len: usize, harmonics: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                let t = n as f64 / FS;
                let phase = 2.0 * PI * 100.0 * (t - 0.05 / (2.0 * PI * 5.0) * ((2.0 * PI * 5.0 * t).cos() - 1.0));
                (1..=harmonics).map(|h| (h as f64 * phase).cos()).sum()
            })
            .collect()
    }

    fn vibrato_track(duration: f64) -> F0Track {
        let times: Vec<f64> = (0..=(duration * 1000.0) as usize).map(|i| i as f64 * 1e-3).collect();
        let f0 = times.iter().map(|&t| vibrato_f0(t)).collect();
        let n = times.len();
        F0Track::new(times, f0, vec![true; n]).unwrap()
    }

    #[test]
    fn track_validation() {
        assert!(F0Track::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![true, true]).is_err());
        assert!(F0Track::new(vec![0.0], vec![1.0, 2.0], vec![true]).is_err());
        assert!(F0Track::new(vec![0.0, 1.0], vec![100.0, -1.0], vec![true, true]).is_err());
        assert!(F0Track::new(vec![0.0, 1.0], vec![100.0, 0.0], vec![true, false]).is_ok());
    }

    #[test]
    fn unvoiced_points_take_nearest_voiced_f0() {
        let t = F0Track::new(
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            vec![0.0, 110.0, 0.0, 0.0, 150.0, 0.0],
            vec![false, true, false, false, true, false],
        )
        .unwrap();
        assert_eq!(t.filled().unwrap(), vec![110.0, 110.0, 110.0, 150.0, 150.0, 150.0]);
        let s = t.sampler().unwrap();
        assert_eq!(s.at(-1.0), 110.0);
        assert_eq!(s.at(2.5), 130.0);
        assert!(!t.is_voiced_at(2.4) && t.is_voiced_at(3.6) && !t.is_voiced_at(7.0));
    }

    #[test]
    fn no_voicing_is_an_error() {
        let t = F0Track::new(vec![0.0, 1.0], vec![0.0, 0.0], vec![false, false]).unwrap();
        assert!(matches!(time_warp(&[0.0; 100], FS, &t, 100.0), Err(Error::NoVoicing)));
    }

    #[test]
    fn constant_target_f0_is_identity() {
        let s: Vec<f64> = (0..4000).map(|n| (n as f64 * 0.37).sin() + 0.2 * (n as f64 * 1.9).cos()).collect();
        let w = time_warp(&s, FS, &F0Track::constant(100.0, 1.0, 0.01).unwrap(), 100.0).unwrap();
        assert_eq!(w.samples.len(), s.len());
        for (a, b) in w.samples.iter().zip(&s) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    fn autocorr_period(x: &[f64], lo: usize, hi: usize) -> f64 {
        let r = |lag: usize| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>();
        let best = (lo..=hi).max_by(|&a, &b| r(a).total_cmp(&r(b))).unwrap();
        let (ym, y0, yp) = (r(best - 1), r(best), r(best + 1));
        best as f64 + 0.5 * (ym - yp) / (ym - 2.0 * y0 + yp)
    }

    #[test]
    fn double_f0_doubles_duration_and_halves_pitch() {
        let s: Vec<f64> = (0..8820)
            .map(|n| (1..=10).map(|h| (2.0 * PI * 200.0 * h as f64 * n as f64 / FS).cos()).sum())
            .collect();
        let w = time_warp(&s, FS, &F0Track::constant(200.0, 1.0, 0.01).unwrap(), 100.0).unwrap();
        assert!((w.samples.len() as f64 / s.len() as f64 - 2.0).abs() < 1e-3);
        let mid = &w.samples[4000..12000];
        assert!((autocorr_period(mid, 300, 600) / 441.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn vibrato_is_flattened() {
        let s = vibrato_signal(44100, 20);
        let w = time_warp(&s, FS, &vibrato_track(1.0), 100.0).unwrap();
        // Apparent pitch by autocorrelation over successive segments.
        for start in (2000..38000).step_by(4000) {
            let p = autocorr_period(&w.samples[start..start + 3000], 350, 550);
            assert!((p / 441.0 - 1.0).abs() < 0.005, "segment at {start}: period {p}");
        }
        // IF of the fundamental on the warped axis.
        let win = sample_window(&WindowSpec::new(WindowKind::SixTerm, 100.0, FS)).unwrap();
        let mut an = FrameAnalyzer::new(win, 32768).unwrap();
        let bin = (100.0 * 32768.0 / FS).round() as usize;
        for c in (5000..38000).step_by(3000) {
            let f = an.analyze(&w.samples, c).unwrap();
            let hz = instantaneous_frequency(&f, 1e-12).omega_i[bin] / (2.0 * PI);
            assert!((hz / 100.0 - 1.0).abs() < 0.002, "frame {c}: {hz} Hz");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn warp_round_trip_within_a_sample(t in 0.0f64..0.5) {
            let s = vec![0.0; 22050];
            let w = time_warp(&s, FS, &vibrato_track(0.5), 100.0).unwrap();
            prop_assert!((w.t_of_tau(w.tau_of_t(t)) - t).abs() < 1.0 / FS);
            prop_assert!(w.map.rate_at(t) > 0.0);
        }
    }

    fn frame(time: f64, freqs: &[f64], vals: &[f64]) -> SnrFrame {
        SnrFrame { time, f0: freqs[0], harmonic_freqs: freqs.to_vec(), snr_db: vals.to_vec() }
    }

    #[test]
    fn interpolation_identities() {
        let map = SnrMap {
            frames: vec![
                frame(0.0, &[100.0, 200.0, 300.0], &[10.0, 20.0, 30.0]),
                frame(0.005, &[110.0, 220.0, 330.0], &[30.0, 40.0, 50.0]),
                frame(0.050, &[100.0, 200.0], &[0.0, 0.0]),
                frame(0.055, &[100.0, 200.0], &[0.0, 0.0]),
            ],
            frame_period: 0.005,
        };
        let g = interpolate_map(&map, &[0.0, 0.0025, 0.005, 0.02, 0.1], &[50.0, 100.0, 150.0, 330.0, 400.0]).unwrap();
        assert_eq!(g.at(0, 1), 10.0);
        assert_eq!(g.at(0, 2), 15.0);
        assert_eq!(g.at(0, 0), 10.0);
        assert_eq!(g.at(0, 4), 30.0);
        assert_eq!(g.at(2, 3), 50.0);
        // Midway at 100 Hz: 10 at the first frame, 30 at the second.
        assert!((g.at(1, 1) - 20.0).abs() < 1e-12);
        assert!(g.at(3, 1).is_nan() && g.at(4, 0).is_nan());
        assert_eq!(g.values_or_null()[15], None);
    }

    #[test]
    fn constant_anchors_give_constant_grid() {
        let map = SnrMap {
            frames: (0..5).map(|k| frame(k as f64 * 0.005, &[90.0, 180.0, 270.0], &[17.5; 3])).collect(),
            frame_period: 0.005,
        };
        let times: Vec<f64> = (0..41).map(|i| i as f64 * 0.0005).collect();
        let freqs: Vec<f64> = (0..60).map(|i| i as f64 * 10.0).collect();
        let g = interpolate_map(&map, &times, &freqs).unwrap();
        assert!(g.values.iter().all(|&v| v == 17.5));
        assert!(interpolate_map(&SnrMap { frames: map.frames[..1].to_vec(), frame_period: 0.005 }, &times, &freqs).is_err());
    }

    fn cal_for(settings: &AnalysisSettings, c0: f64) -> CalibrationConstant {
        let c = settings.estimator;
        CalibrationConstant {
            window: c.window,
            length_scale: c.length_scale,
            smoothing_width: c.smoothing_width,
            fft_size: c.fft_size,
            sample_rate: c.sample_rate,
            f_tgt: c.f_tgt,
            c_eq: 0.0,
            c0,
            anchor: "test".into(),
        }
    }

    #[test]
    fn anchors_follow_harmonics_and_scale_invariance() {
        let settings = AnalysisSettings::default();
        let cal = cal_for(&settings, 2.6);
        let s = vibrato_signal(22050, 30);
        let noisy: Vec<f64> = s
            .iter()
            .enumerate()
            .map(|(n, v)| v + 0.05 * ((n as f64 * 12.9898).sin() * 43758.5453).fract())
            .collect();
        let track = vibrato_track(0.5);
        let map = analyze_utterance(&noisy, FS, &track, &settings, &cal).unwrap();
        assert!(map.frames.len() > 10);
        for f in &map.frames {
            let expect_n = harmonic_limit(FS, f.f0).min(harmonic_limit(FS, 100.0));
            assert_eq!(f.harmonic_freqs.len(), expect_n);
            for (i, fr) in f.harmonic_freqs.iter().enumerate() {
                assert!((fr - (i + 1) as f64 * vibrato_f0(f.time)).abs() < 1e-9);
            }
        }
        let scaled: Vec<f64> = noisy.iter().map(|v| v * 37.0).collect();
        let map2 = analyze_utterance(&scaled, FS, &track, &settings, &cal).unwrap();
        for (a, b) in map.anchors().iter().zip(map2.anchors()) {
            assert!((a.snr_db - b.snr_db).abs() < 1e-4, "{a:?} {b:?}");
        }
    }

    #[test]
    fn noise_free_signal_hits_ceiling() {
        let settings = AnalysisSettings { warp: false, ..AnalysisSettings::default() };
        let pulses: Vec<f64> = (0..22050).map(|n| if n % 441 == 0 { 1.0 } else { 0.0 }).collect();
        let track = F0Track::constant(100.0, 0.5, 0.001).unwrap();
        let map = analyze_utterance(&pulses, FS, &track, &settings, &cal_for(&settings, 2.6)).unwrap();
        let anchors = map.anchors();
        assert!(!anchors.is_empty());
        assert!(anchors.iter().all(|a| a.snr_db == settings.ceiling_db));
    }

    #[test]
    fn mismatched_calibration_rejected() {
        let settings = AnalysisSettings::default();
        let mut cal = cal_for(&settings, 1.0);
        cal.window = WindowKind::Hanning;
        let track = F0Track::constant(100.0, 0.2, 0.01).unwrap();
        assert!(matches!(
            analyze_utterance(&[0.1; 8820], FS, &track, &settings, &cal),
            Err(Error::Config(_))
        ));
    }
}
