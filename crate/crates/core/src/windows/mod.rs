//! Analysis windows and their time derivatives.
//!
//! Eight window shapes are supported: five cosine series (Hanning, Blackman,
//! two Nuttall minimum-sidelobe designs and the six-term design with
//! -114 dB sidelobes), a Kaiser window and two discrete prolate spheroidal
//! sequences. Every shape is parameterised by its *nominal length*: the
//! duration, in fundamental periods, that puts the first spectral zero of
//! the window at the fundamental frequency.
//!
//! Cosine-series windows carry an analytic derivative. Kaiser and DPSS
//! derivatives are taken numerically with fourth-order differences on an
//! eight times oversampled grid.

mod dpss;
mod metrics;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dpss::dpss;
pub use metrics::{window_gain_curve, window_metrics, window_shape_curve, WindowMetrics};

/// Largest window (in samples) `sample_window` will build.
pub const MAX_WINDOW_SAMPLES: usize = 1 << 22;

/// Default stretch applied to the nominal length of every window.
pub const DEFAULT_LENGTH_SCALE: f64 = 1.5;

/// Maximum sidelobe level that fixes the Kaiser shape parameter.
pub const KAISER_SIDELOBE_DB: f64 = -98.32;

const DERIVATIVE_OVERSAMPLE: usize = 8;

const SIX_TERM: [f64; 6] = [
    0.2624710164,
    0.4265335164,
    0.2250165621,
    0.0726831633,
    0.0125124215,
    0.0007833203,
];

const HANNING: [f64; 2] = [0.5, 0.5];
const BLACKMAN: [f64; 3] = [0.42, 0.5, 0.08];
// Nuttall's minimum-sidelobe family, items 11 and 15 (the latter is the
// common "nuttallwin").
const NUTTALL_11: [f64; 4] = [0.338946, 0.481973, 0.161054, 0.018027];
const NUTTALL_15: [f64; 4] = [0.3635819, 0.4891775, 0.1365995, 0.0106411];

/// The eight tested window shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WindowKind {
    #[serde(rename = "hanning")]
    Hanning,
    #[serde(rename = "blackman")]
    Blackman,
    #[serde(rename = "nuttall-11")]
    Nuttall11,
    #[serde(rename = "nuttall-15")]
    Nuttall15,
    #[serde(rename = "six-term")]
    SixTerm,
    #[serde(rename = "kaiser")]
    Kaiser,
    #[serde(rename = "dpss-4")]
    Dpss4,
    #[serde(rename = "dpss-4.5")]
    Dpss45,
}

impl WindowKind {
    pub const ALL: [WindowKind; 8] = [
        WindowKind::Hanning,
        WindowKind::Blackman,
        WindowKind::Nuttall11,
        WindowKind::Nuttall15,
        WindowKind::SixTerm,
        WindowKind::Kaiser,
        WindowKind::Dpss4,
        WindowKind::Dpss45,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Hanning => "hanning",
            WindowKind::Blackman => "blackman",
            WindowKind::Nuttall11 => "nuttall-11",
            WindowKind::Nuttall15 => "nuttall-15",
            WindowKind::SixTerm => "six-term",
            WindowKind::Kaiser => "kaiser",
            WindowKind::Dpss4 => "dpss-4",
            WindowKind::Dpss45 => "dpss-4.5",
        }
    }

    /// Cosine-series coefficients, `None` for Kaiser and DPSS.
    pub fn cosine_coefficients(self) -> Option<&'static [f64]> {
        match self {
            WindowKind::Hanning => Some(&HANNING),
            WindowKind::Blackman => Some(&BLACKMAN),
            WindowKind::Nuttall11 => Some(&NUTTALL_11),
            WindowKind::Nuttall15 => Some(&NUTTALL_15),
            WindowKind::SixTerm => Some(&SIX_TERM),
            _ => None,
        }
    }

    /// Time-half-bandwidth product for the DPSS kinds.
    pub fn dpss_nw(self) -> Option<f64> {
        match self {
            WindowKind::Dpss4 => Some(4.0),
            WindowKind::Dpss45 => Some(4.5),
            _ => None,
        }
    }

    /// Window length, in fundamental periods, that places the first zero of
    /// the gain at the fundamental.
    pub fn nominal_length(self) -> f64 {
        match self {
            WindowKind::Hanning => 2.0,
            WindowKind::Blackman => 3.0,
            WindowKind::Nuttall11 | WindowKind::Nuttall15 => 4.0,
            WindowKind::SixTerm => 6.0,
            WindowKind::Kaiser => (1.0 + (kaiser_beta() / PI).powi(2)).sqrt(),
            WindowKind::Dpss4 => {
                static L: OnceLock<f64> = OnceLock::new();
                *L.get_or_init(|| metrics::dpss_first_null(4.0))
            }
            WindowKind::Dpss45 => {
                static L: OnceLock<f64> = OnceLock::new();
                *L.get_or_init(|| metrics::dpss_first_null(4.5))
            }
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        let kind = match norm.as_str() {
            "hanning" | "hann" => WindowKind::Hanning,
            "blackman" => WindowKind::Blackman,
            "nuttall-11" | "nuttall11" => WindowKind::Nuttall11,
            "nuttall-15" | "nuttall15" => WindowKind::Nuttall15,
            "six-term" | "sixterm" => WindowKind::SixTerm,
            "kaiser" => WindowKind::Kaiser,
            "dpss-4" | "dpss4" => WindowKind::Dpss4,
            "dpss-4.5" | "dpss4.5" | "dpss45" => WindowKind::Dpss45,
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "unknown window kind '{s}' (expected one of: {})",
                    WindowKind::ALL.map(|k| k.name()).join(", ")
                )))
            }
        };
        Ok(kind)
    }
}

/// Physical configuration of an analysis window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub kind: WindowKind,
    /// Fundamental the window is designed for, in Hz.
    pub f0_target: f64,
    /// Multiple of the nominal length actually used.
    pub length_scale: f64,
    pub sample_rate: f64,
}

impl WindowSpec {
    pub fn new(kind: WindowKind, f0_target: f64, sample_rate: f64) -> Self {
        WindowSpec {
            kind,
            f0_target,
            length_scale: DEFAULT_LENGTH_SCALE,
            sample_rate,
        }
    }

    pub fn with_length_scale(mut self, length_scale: f64) -> Self {
        self.length_scale = length_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0_target > 0.0 && self.f0_target.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "f0 target must be positive, got {}",
                self.f0_target
            )));
        }
        if !(self.sample_rate > 2.0 * self.f0_target && self.sample_rate.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "sample rate {} must exceed twice the f0 target {}",
                self.sample_rate, self.f0_target
            )));
        }
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "length scale must be positive, got {}",
                self.length_scale
            )));
        }
        Ok(())
    }

    /// Half length t_w in seconds.
    pub fn half_length_seconds(&self) -> f64 {
        self.length_scale * self.kind.nominal_length() / (2.0 * self.f0_target)
    }

    pub fn half_length_samples(&self) -> usize {
        (self.half_length_seconds() * self.sample_rate).round() as usize
    }
}

/// A window and its time derivative on the sample grid.
///
/// Index `center_index` is t = 0; index `center_index + n` is t = n / fs.
/// Both arrays extend a couple of samples past `half_length_samples`; the
/// window is zero there but its derivative need not be.
#[derive(Debug, Clone)]
pub struct SampledWindow {
    pub spec: WindowSpec,
    pub samples: Vec<f64>,
    /// dw/dt in 1/s.
    pub derivative_samples: Vec<f64>,
    pub half_length_samples: usize,
    pub center_index: usize,
    /// Sum of squared samples times the sample period.
    pub energy: f64,
}

impl SampledWindow {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.spec.sample_rate
    }

    pub fn kind(&self) -> WindowKind {
        self.spec.kind
    }

    /// Half-width, in samples, of the span where either array is nonzero.
    pub fn support_half_samples(&self) -> usize {
        self.center_index
    }
}

/// Evaluates `sum_k h_k cos(k pi t / t_w)` inside `|t| < t_w`, zero outside.
pub fn cosine_series_window(coefficients: &[f64], t_w: f64, t: f64) -> Result<f64> {
    check_cosine_args(coefficients, t_w)?;
    if t.abs() >= t_w {
        return Ok(0.0);
    }
    Ok(coefficients
        .iter()
        .enumerate()
        .map(|(k, h)| h * (k as f64 * PI * t / t_w).cos())
        .sum())
}

/// Analytic time derivative of [`cosine_series_window`].
pub fn cosine_series_derivative(coefficients: &[f64], t_w: f64, t: f64) -> Result<f64> {
    check_cosine_args(coefficients, t_w)?;
    if t.abs() >= t_w {
        return Ok(0.0);
    }
    Ok(-coefficients
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let rate = k as f64 * PI / t_w;
            h * rate * (rate * t).sin()
        })
        .sum::<f64>())
}

fn check_cosine_args(coefficients: &[f64], t_w: f64) -> Result<()> {
    if coefficients.is_empty() {
        return Err(Error::InvalidSpec("empty cosine coefficient list".into()));
    }
    if !(t_w > 0.0) {
        return Err(Error::InvalidSpec(format!("half length must be positive, got {t_w}")));
    }
    Ok(())
}

/// The ten-digit six-term coefficients.
pub fn six_term_coefficients() -> [f64; 6] {
    SIX_TERM
}

/// Kaiser shape parameter giving a maximum sidelobe of
/// [`KAISER_SIDELOBE_DB`].
///
/// The continuous Kaiser transform is `sinh(sqrt(b^2 - x^2)) / sqrt(b^2 - x^2)`
/// with `x = pi f L`; past the main lobe it oscillates as `sin(u)/u`, so the
/// largest sidelobe relative to the peak is `A1 * b / sinh(b)` where `A1` is
/// the first sidelobe peak of `sin(u)/u`.
pub fn kaiser_beta() -> f64 {
    static BETA: OnceLock<f64> = OnceLock::new();
    *BETA.get_or_init(|| kaiser_beta_for_sidelobe(KAISER_SIDELOBE_DB))
}

pub fn kaiser_beta_for_sidelobe(sidelobe_db: f64) -> f64 {
    let a1 = sinc_first_sidelobe();
    let target = 10f64.powf(sidelobe_db / 20.0);
    let level = |b: f64| a1 * b / b.sinh();
    // level() is monotone decreasing in b.
    let (mut lo, mut hi) = (1e-6, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if level(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Height of the first sidelobe of |sin(u)/u|, at the root of tan u = u in (pi, 3pi/2).
fn sinc_first_sidelobe() -> f64 {
    let mut u: f64 = 4.4934;
    for _ in 0..50 {
        let f = u.tan() - u;
        let df = 1.0 / u.cos().powi(2) - 1.0;
        u -= f / df;
    }
    (u.sin() / u).abs()
}

/// Modified Bessel function of the first kind, order zero.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Kaiser shape at normalised time `x` in [-1, 1], peak one.
pub(crate) fn kaiser_shape(beta: f64, x: f64) -> f64 {
    if x.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - x * x).max(0.0).sqrt()) / bessel_i0(beta)
}

/// Zero samples kept past each end of the window, where the derivative of a
/// window with nonzero end values is still nonzero.
const EDGE_PAD: usize = 2;

/// Samples a window and its time derivative for the given spec.
pub fn sample_window(spec: &WindowSpec) -> Result<SampledWindow> {
    spec.validate()?;
    let half = spec.half_length_samples();
    if half == 0 {
        return Err(Error::InvalidSpec("window shorter than one sample".into()));
    }
    if 2 * half + 1 > MAX_WINDOW_SAMPLES {
        return Err(Error::InvalidSpec(format!(
            "window of {} samples exceeds the {MAX_WINDOW_SAMPLES}-sample limit",
            2 * half + 1
        )));
    }
    let fs = spec.sample_rate;
    let t_w = spec.half_length_seconds();

    // Right half (n = 0..=half); mirrored below so symmetry is exact.
    let (right, right_d): (Vec<f64>, Vec<f64>) = match spec.kind {
        kind if kind.cosine_coefficients().is_some() => {
            let c = kind.cosine_coefficients().unwrap();
            (0..=half)
                .map(|n| {
                    let t = n as f64 / fs;
                    (
                        cosine_series_window(c, t_w, t).unwrap(),
                        cosine_series_derivative(c, t_w, t).unwrap(),
                    )
                })
                .unzip()
        }
        WindowKind::Kaiser => {
            let beta = kaiser_beta();
            let fine_fs = fs * DERIVATIVE_OVERSAMPLE as f64;
            let j_max = (t_w * fine_fs).floor() as usize;
            let fine: Vec<f64> = (0..=2 * j_max)
                .map(|j| kaiser_shape(beta, (j as f64 - j_max as f64) / fine_fs / t_w))
                .collect();
            decimate_right_half(&fine, fine_fs, half)
        }
        kind => {
            let nw = kind.dpss_nw().expect("dpss kind");
            let fine_fs = fs * DERIVATIVE_OVERSAMPLE as f64;
            let j_max = DERIVATIVE_OVERSAMPLE * half;
            let mut fine = dpss(2 * j_max + 1, nw)?;
            symmetrize(&mut fine);
            decimate_right_half(&fine, fine_fs, half)
        }
    };

    let c = half + EDGE_PAD;
    let len = 2 * c + 1;
    let mut samples = vec![0.0; len];
    let mut derivative_samples = vec![0.0; len];
    for n in 0..=half {
        samples[c + n] = right[n];
        samples[c - n] = right[n];
        derivative_samples[c + n] = right_d[n];
        derivative_samples[c - n] = -right_d[n];
    }
    derivative_samples[c] = 0.0;
    // Within two samples of either end, use the central difference of the
    // zero-extended samples. Its transform is j nu W(nu) up to a relative
    // nu^4 / 30, jumps at the ends included, which keeps the IF of a pure tone
    // exact for windows that do not fall to zero at their ends.
    let mut ext = vec![0.0; len + 4];
    ext[2..len + 2].copy_from_slice(&samples);
    for n in half.saturating_sub(EDGE_PAD).max(1)..=half + EDGE_PAD {
        let j = c + n + 2;
        let v = (ext[j - 2] - 8.0 * ext[j - 1] + 8.0 * ext[j + 1] - ext[j + 2]) * fs / 12.0;
        derivative_samples[c + n] = v;
        derivative_samples[c - n] = -v;
    }
    let energy = samples.iter().map(|w| w * w).sum::<f64>() / fs;

    Ok(SampledWindow {
        spec: *spec,
        samples,
        derivative_samples,
        half_length_samples: half,
        center_index: c,
        energy,
    })
}

fn symmetrize(v: &mut [f64]) {
    let n = v.len();
    for i in 0..n / 2 {
        let m = 0.5 * (v[i] + v[n - 1 - i]);
        v[i] = m;
        v[n - 1 - i] = m;
    }
}

/// Takes every `DERIVATIVE_OVERSAMPLE`-th point of the right half of a fine,
/// centred grid, along with a fourth-order derivative estimate.
fn decimate_right_half(fine: &[f64], fine_fs: f64, half: usize) -> (Vec<f64>, Vec<f64>) {
    let d = fourth_order_derivative(fine, 1.0 / fine_fs);
    let centre = fine.len() / 2;
    (0..=half)
        .map(|n| {
            let j = centre + n * DERIVATIVE_OVERSAMPLE;
            if j < fine.len() {
                (fine[j], d[j])
            } else {
                (0.0, 0.0)
            }
        })
        .unzip()
}

/// Fourth-order finite-difference derivative; one-sided stencils at the ends
/// so the derivative covers only the smooth part inside the support.
pub(crate) fn fourth_order_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    if n < 5 {
        for i in 0..n {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            if b > a {
                d[i] = (f[b] - f[a]) / ((b - a) as f64 * h);
            }
        }
        return d;
    }
    let s = 12.0 * h;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / s;
    }
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / s;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / s;
    let m = n - 1;
    d[m] = (25.0 * f[m] - 48.0 * f[m - 1] + 36.0 * f[m - 2] - 16.0 * f[m - 3] + 3.0 * f[m - 4]) / s;
    d[m - 1] = (3.0 * f[m] + 10.0 * f[m - 1] - 18.0 * f[m - 2] + 6.0 * f[m - 3] - f[m - 4]) / s;
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn six_term_coefficients_are_the_published_constants() {
        let h = six_term_coefficients();
        assert_eq!(h[0], 0.2624710164);
        assert_eq!(h[5], 0.0007833203);
        // Sum and alternating sum at ten-digit precision.
        let sum: f64 = h.iter().sum();
        let alt: f64 = h.iter().enumerate().map(|(k, v)| if k % 2 == 0 { *v } else { -v }).sum();
        assert!((sum - 1.0).abs() < 1e-10, "sum = {sum}");
        assert!(alt.abs() < 1e-10, "alternating sum = {alt}");
    }

    #[test]
    fn cosine_series_values() {
        let h = six_term_coefficients();
        assert_relative_eq!(cosine_series_window(&h, 0.03, 0.0).unwrap(), 1.0, epsilon = 1e-10);
        let just_inside = 0.03 * (1.0 - 1e-12);
        assert!(cosine_series_window(&h, 0.03, just_inside).unwrap().abs() < 1e-10);
        assert_eq!(cosine_series_window(&h, 0.03, 0.03).unwrap(), 0.0);
        assert_eq!(cosine_series_window(&h, 0.03, -0.5).unwrap(), 0.0);
        let hann = [0.5, 0.5];
        assert_relative_eq!(cosine_series_window(&hann, 2.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn empty_coefficients_rejected() {
        assert!(matches!(cosine_series_window(&[], 1.0, 0.0), Err(Error::InvalidSpec(_))));
        assert!(matches!(cosine_series_derivative(&[], 1.0, 0.0), Err(Error::InvalidSpec(_))));
        assert!(cosine_series_window(&[1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn half_length_of_six_term_at_100_hz() {
        let spec = WindowSpec::new(WindowKind::SixTerm, 100.0, 44100.0).with_length_scale(1.0);
        let w = sample_window(&spec).unwrap();
        assert_eq!(w.half_length_samples, 1323);
        assert_eq!(w.support_half_samples(), 1325);
        assert_eq!(w.len(), 2651);
        assert_eq!(w.samples[w.center_index + 1324], 0.0);
    }

    #[test]
    fn derivative_transform_is_j_nu_times_window_transform() {
        // w even and w_d odd, so W is real and W_d = -j sum w_d sin(nu n / fs).
        let fs = 44100.0;
        for kind in WindowKind::ALL {
            let w = sample_window(&WindowSpec::new(kind, 100.0, fs)).unwrap();
            let c = w.center_index as isize;
            let at = |nu: f64| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, (a, d)) in w.samples.iter().zip(&w.derivative_samples).enumerate() {
                    let ph = nu * (i as isize - c) as f64 / fs;
                    re += a * ph.cos();
                    im -= d * ph.sin();
                }
                (re, im)
            };
            let peak = at(0.0).0;
            for hz in [3.0, 20.0, 45.0, 66.0] {
                let nu = 2.0 * PI * hz;
                let (wv, wd) = at(nu);
                assert!((wd - nu * wv).abs() < 1e-9 * nu * peak, "{kind} at {hz} Hz");
            }
        }
    }

    #[test]
    fn hanning_derivative_vanishes_at_centre() {
        let spec = WindowSpec::new(WindowKind::Hanning, 123.0, 16000.0);
        let w = sample_window(&spec).unwrap();
        assert_eq!(w.derivative_samples[w.center_index], 0.0);
        assert_relative_eq!(w.samples[w.center_index], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in WindowKind::ALL {
            assert_eq!(kind.name().parse::<WindowKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
        assert!("bogus".parse::<WindowKind>().is_err());
    }

    #[test]
    fn kaiser_beta_gives_published_nominal_length() {
        let beta = kaiser_beta();
        assert!((beta - 13.05).abs() < 0.02, "beta = {beta}");
        assert!((WindowKind::Kaiser.nominal_length() - 4.273).abs() < 0.002);
    }

    #[test]
    fn bessel_i0_reference_values() {
        // Abramowitz & Stegun table 9.8.
        assert_relative_eq!(bessel_i0(0.0), 1.0);
        assert_relative_eq!(bessel_i0(1.0), 1.266_065_877_752_008_4, max_relative = 1e-14);
        assert_relative_eq!(bessel_i0(10.0), 2815.716_628_466_254, max_relative = 1e-13);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = [
            WindowSpec::new(WindowKind::SixTerm, 0.0, 44100.0),
            WindowSpec::new(WindowKind::SixTerm, 100.0, 150.0),
            WindowSpec::new(WindowKind::SixTerm, 100.0, 44100.0).with_length_scale(-1.0),
            // Far too long to buffer.
            WindowSpec::new(WindowKind::SixTerm, 0.01, 44100.0),
        ];
        for spec in bad {
            assert!(matches!(sample_window(&spec), Err(Error::InvalidSpec(_))), "{spec:?}");
        }
    }

    #[test]
    fn fourth_order_derivative_is_exact_for_quartics() {
        let h = 0.1;
        let f: Vec<f64> = (0..12).map(|i| (i as f64 * h).powi(4)).collect();
        let d = fourth_order_derivative(&f, h);
        for (i, v) in d.iter().enumerate() {
            let x = i as f64 * h;
            assert_relative_eq!(*v, 4.0 * x.powi(3), epsilon = 1e-9);
        }
    }
}
