//! Short-time spectra with analytic time derivatives, per-bin instantaneous
//! frequency, and the power-weighted smoothed IF map.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::windows::SampledWindow;

/// Bins whose power falls below this fraction of the frame maximum carry no
/// IF estimate.
pub const DEFAULT_POWER_FLOOR: f64 = 1e-12;

/// Complex spectrum `x` and derivative spectrum `x_d = dx/dt` at one frame.
#[derive(Debug, Clone)]
pub struct SpectrumFrame {
    pub center_time: f64,
    /// Angular frequency of each bin, rad/s.
    pub bin_freqs: Vec<f64>,
    pub x: Vec<Complex64>,
    pub x_d: Vec<Complex64>,
    pub power: Vec<f64>,
}

impl SpectrumFrame {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Bin spacing in rad/s.
    pub fn bin_spacing(&self) -> f64 {
        self.bin_freqs.get(1).copied().unwrap_or(0.0)
    }
}

/// Raw instantaneous frequency of one frame.
#[derive(Debug, Clone)]
pub struct IFFrame {
    pub center_time: f64,
    /// rad/s; NaN at masked bins.
    pub omega_i: Vec<f64>,
    pub power: Vec<f64>,
    pub singular_mask: Vec<bool>,
    /// `Im(conj(x) x_d)`, the power-weighted IF, defined at every bin.
    pub weighted_if: Vec<f64>,
    /// Absolute power threshold used for masking.
    pub power_threshold: f64,
    pub bin_spacing: f64,
}

/// Smoothed IF of one frame.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothedFrame {
    pub center_time: f64,
    /// rad/s; NaN where the smoothed power falls under the centre tap times
    /// the power floor.
    pub omega_is: Vec<f64>,
    /// Smoothing denominator, the kernel-weighted power.
    pub weight: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothedIFMap {
    pub frames: Vec<SmoothedFrame>,
    /// Half-width of the smoothing kernel support, rad/s.
    pub kernel_halfwidth: f64,
    /// Bin spacing, rad/s.
    pub bin_spacing: f64,
}

impl SmoothedIFMap {
    /// Index of the frame whose centre lies within `tol` seconds of `t`.
    pub fn frame_near(&self, t: f64, tol: f64) -> Option<usize> {
        self.frames.iter().position(|f| (f.center_time - t).abs() <= tol)
    }
}

/// Reusable FFT plan and scratch for one window and FFT size.
///
/// Each worker thread should own its analyzer.
#[derive(Clone)]
pub struct FrameAnalyzer {
    window: SampledWindow,
    fft_size: usize,
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
    bin_freqs: Vec<f64>,
}

impl FrameAnalyzer {
    pub fn new(window: SampledWindow, fft_size: usize) -> Result<Self> {
        if !fft_size.is_power_of_two() || fft_size < 2 {
            return Err(Error::InvalidSpec(format!(
                "fft size {fft_size} is not a power of two"
            )));
        }
        if fft_size < window.len() {
            return Err(Error::InvalidSpec(format!(
                "fft size {fft_size} shorter than window of {} samples",
                window.len()
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        let scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let fs = window.sample_rate();
        let bin_freqs = (0..=fft_size / 2)
            .map(|k| 2.0 * PI * k as f64 * fs / fft_size as f64)
            .collect();
        Ok(FrameAnalyzer {
            window,
            fft_size,
            fft,
            buffer: vec![Complex64::default(); fft_size],
            scratch,
            bin_freqs,
        })
    }

    pub fn window(&self) -> &SampledWindow {
        &self.window
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn bin_spacing(&self) -> f64 {
        self.bin_freqs[1]
    }

    /// Spectrum of the segment centred on `center_sample`; samples outside the
    /// signal are treated as zero.
    ///
    /// The window and its derivative share one complex FFT: the real part of
    /// the input carries `s w`, the imaginary part `s w_d`.
    pub fn analyze(&mut self, signal: &[f64], center_sample: isize) -> Result<SpectrumFrame> {
        if signal.is_empty() {
            return Err(Error::InvalidInput("empty signal".into()));
        }
        let n = self.fft_size;
        let c = self.window.center_index as isize;
        let half = c;
        self.buffer.iter_mut().for_each(|z| *z = Complex64::default());
        for m in -half..=half {
            let idx = center_sample + m;
            if idx < 0 || idx >= signal.len() as isize {
                continue;
            }
            let s = signal[idx as usize];
            let wi = (c + m) as usize;
            // Circular placement puts the frame centre at index 0.
            let slot = m.rem_euclid(n as isize) as usize;
            self.buffer[slot] = Complex64::new(
                s * self.window.samples[wi],
                s * self.window.derivative_samples[wi],
            );
        }
        self.fft.process_with_scratch(&mut self.buffer, &mut self.scratch);

        let bins = n / 2 + 1;
        let mut x = Vec::with_capacity(bins);
        let mut x_d = Vec::with_capacity(bins);
        let mut power = Vec::with_capacity(bins);
        for k in 0..bins {
            let z = self.buffer[k];
            let zc = self.buffer[(n - k) % n].conj();
            let xw = (z + zc) * 0.5;
            // (z - zc) / 2j
            let dz = (z - zc) * 0.5;
            let xwd = Complex64::new(dz.im, -dz.re);
            let omega = self.bin_freqs[k];
            let xd = Complex64::new(-omega * xw.im, omega * xw.re) - xwd;
            power.push(xw.norm_sqr());
            x.push(xw);
            x_d.push(xd);
        }
        Ok(SpectrumFrame {
            center_time: center_sample as f64 / self.window.sample_rate(),
            bin_freqs: self.bin_freqs.clone(),
            x,
            x_d,
            power,
        })
    }
}

/// One-shot frame analysis. Prefer [`FrameAnalyzer`] in loops.
pub fn analyze_frame(
    signal: &[f64],
    window: &SampledWindow,
    center_sample: isize,
    fft_size: usize,
) -> Result<SpectrumFrame> {
    FrameAnalyzer::new(window.clone(), fft_size)?.analyze(signal, center_sample)
}

/// Flanagan's instantaneous frequency per bin.
pub fn instantaneous_frequency(frame: &SpectrumFrame, power_floor: f64) -> IFFrame {
    let max_power = frame.power.iter().cloned().fold(0.0f64, f64::max);
    let threshold = power_floor * max_power;
    let mut omega_i = Vec::with_capacity(frame.len());
    let mut mask = Vec::with_capacity(frame.len());
    let mut weighted = Vec::with_capacity(frame.len());
    for k in 0..frame.len() {
        let x = frame.x[k];
        let xd = frame.x_d[k];
        let p = frame.power[k];
        let num = x.re * xd.im - x.im * xd.re;
        weighted.push(num);
        let masked = p < threshold || p == 0.0;
        mask.push(masked);
        omega_i.push(if masked { f64::NAN } else { num / p });
    }
    IFFrame {
        center_time: frame.center_time,
        omega_i,
        power: frame.power.clone(),
        singular_mask: mask,
        weighted_if: weighted,
        power_threshold: threshold,
        bin_spacing: frame.bin_spacing(),
    }
}

/// Smoothed IF at a single bin.
///
/// Kernel taps falling off either end of the spectrum are dropped; the ratio
/// renormalizes over the taps that remain.
fn smoothed_at(frame: &IFFrame, kernel: &[f64], k: usize) -> (f64, f64) {
    let h = (kernel.len() / 2) as isize;
    let bins = frame.power.len() as isize;
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, &kv) in kernel.iter().enumerate() {
        let idx = k as isize + j as isize - h;
        if idx < 0 || idx >= bins {
            continue;
        }
        num += kv * frame.weighted_if[idx as usize];
        den += kv * frame.power[idx as usize];
    }
    // A bin that passed the raw floor contributes at least the centre tap
    // times that floor, so it is always retained.
    let value = if den >= kernel[h as usize] * frame.power_threshold && den > 0.0 {
        num / den
    } else {
        f64::NAN
    };
    (value, den)
}

fn check_kernel(kernel: &[f64]) -> Result<()> {
    if kernel.is_empty() || kernel.len() % 2 == 0 {
        return Err(Error::InvalidSpec(format!(
            "kernel must have odd length, got {}",
            kernel.len()
        )));
    }
    if kernel.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidSpec("kernel taps must be finite and non-negative".into()));
    }
    Ok(())
}

/// Power-weighted average of the IF over neighbouring bins.
///
/// `kernel` is centred: tap `kernel.len() / 2` weights the bin itself.
/// Returns `(omega_is, weight)`.
pub fn smooth_if(frame: &IFFrame, kernel: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_kernel(kernel)?;
    let (omega, weight): (Vec<f64>, Vec<f64>) = (0..frame.power.len())
        .map(|k| smoothed_at(frame, kernel, k))
        .unzip();
    if omega.iter().all(|v| v.is_nan()) {
        return Err(Error::EmptyFrame);
    }
    Ok((omega, weight))
}

/// [`smooth_if`] evaluated only at the listed bins.
pub fn smooth_if_at(frame: &IFFrame, kernel: &[f64], bins: &[usize]) -> Result<Vec<f64>> {
    check_kernel(kernel)?;
    if let Some(&b) = bins.iter().find(|&&b| b >= frame.power.len()) {
        return Err(Error::InvalidInput(format!("bin {b} beyond spectrum")));
    }
    if frame.singular_mask.iter().all(|&m| m) {
        return Err(Error::EmptyFrame);
    }
    Ok(bins.iter().map(|&b| smoothed_at(frame, kernel, b).0).collect())
}

/// Raised-cosine kernel `0.5 + 0.5 cos(pi j / (h + 1))` over `|j| <= h`,
/// normalized to unit sum.
pub fn raised_cosine_kernel(halfwidth_bins: f64) -> Result<Vec<f64>> {
    if !(halfwidth_bins >= 1.0 && halfwidth_bins.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "kernel halfwidth must be at least one bin, got {halfwidth_bins}"
        )));
    }
    let h = halfwidth_bins.floor() as isize;
    let taps: Vec<f64> = (-h..=h)
        .map(|j| 0.5 + 0.5 * (PI * j as f64 / (halfwidth_bins + 1.0)).cos())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|v| v / sum).collect())
}

/// Smoothing kernel halfwidth in bins for a width given as a fraction of `f_tgt`.
pub fn smoothing_halfwidth_bins(smoothing_width: f64, f_tgt: f64, fft_size: usize, sample_rate: f64) -> f64 {
    smoothing_width * f_tgt * fft_size as f64 / sample_rate
}

/// Analyzes, masks and smooths frames at the given centres.
pub fn smoothed_if_map(
    analyzer: &mut FrameAnalyzer,
    signal: &[f64],
    centers: &[isize],
    kernel: &[f64],
    power_floor: f64,
) -> Result<SmoothedIFMap> {
    let frames = centers
        .iter()
        .map(|&c| {
            let spec = analyzer.analyze(signal, c)?;
            let raw = instantaneous_frequency(&spec, power_floor);
            let (omega_is, weight) = smooth_if(&raw, kernel)?;
            Ok(SmoothedFrame {
                center_time: spec.center_time,
                omega_is,
                weight,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spacing = analyzer.bin_spacing();
    Ok(SmoothedIFMap {
        frames,
        kernel_halfwidth: (kernel.len() / 2) as f64 * spacing,
        bin_spacing: spacing,
    })
}
