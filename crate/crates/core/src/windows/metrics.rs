use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{dpss, kaiser_beta, kaiser_shape, WindowKind};
use crate::error::{Error, Result};

/// Samples across one window when measuring its spectrum.
const SHAPE_SAMPLES: usize = 4096;
/// Sidelobe peaks below this level are treated as numerical floor.
const DECAY_FLOOR_DB: f64 = -250.0;
/// Sidelobes nearest the main lobe left out of the decay fit.
const DECAY_SKIP_SIDELOBES: usize = 3;
/// Largest neighbour drop, in dB, for which a peak is refined.
const PEAK_REFINE_MAX_DB: f64 = 6.0;

/// Duration of a unit-length rectangular window, sqrt(1/12).
pub const SIGMA_T_RECT: f64 = 0.288_675_134_594_812_9;
/// Bandwidth of a unit-cutoff rectangular low-pass, sqrt(1/3).
pub const SIGMA_F_RECT: f64 = 0.577_350_269_189_625_8;

/// Characterising numbers of a window shape.
///
/// `sigma_t` is in units of the fundamental period and `sigma_f` in units of
/// the fundamental, with the window at its nominal length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub kind: WindowKind,
    pub max_sidelobe_db: f64,
    pub decay_rate_db_per_oct: f64,
    pub nominal_length: f64,
    /// First gain minimum measured on the oversampled spectrum, in fundamental periods.
    pub measured_first_null: f64,
    pub sigma_t: f64,
    pub sigma_f: f64,
    pub sigma_t_ratio: f64,
    pub sigma_f_ratio: f64,
}

/// Window shape on `m` midpoint samples covering its full support.
fn unit_shape(kind: WindowKind, m: usize) -> Result<Vec<f64>> {
    if let Some(c) = kind.cosine_coefficients() {
        return Ok((0..m)
            .map(|i| {
                let x = (2 * i + 1) as f64 / m as f64 - 1.0;
                c.iter().enumerate().map(|(k, h)| h * (k as f64 * PI * x).cos()).sum()
            })
            .collect());
    }
    match kind {
        WindowKind::Kaiser => {
            let beta = kaiser_beta();
            Ok((0..m)
                .map(|i| kaiser_shape(beta, (2 * i + 1) as f64 / m as f64 - 1.0))
                .collect())
        }
        _ => dpss(m, kind.dpss_nw().expect("dpss kind")),
    }
}

/// One-sided magnitude spectrum normalised to its DC value; bin k sits at
/// k / oversample cycles per window length.
fn gain_spectrum(shape: &[f64], oversample: usize) -> Vec<f64> {
    let n = shape.len() * oversample;
    let mut buf: Vec<Complex64> = shape.iter().map(|&w| Complex64::new(w, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let dc = buf[0].norm();
    buf[..=n / 2].iter().map(|z| z.norm() / dc).collect()
}

fn to_db(g: f64) -> f64 {
    20.0 * g.max(1e-300).log10()
}

/// Index of the first local minimum past DC.
fn first_minimum(gain: &[f64]) -> usize {
    let mut i = 1;
    while i + 1 < gain.len() && gain[i + 1] < gain[i] {
        i += 1;
    }
    i
}

/// Sidelobe peaks past `start` as (position in bins, level in dB), refined
/// by parabolic interpolation of the dB values. Peaks whose neighbours drop
/// steeply (bins at the rounding floor, some exactly zero) are left as is.
fn sidelobe_peaks(db: &[f64], start: usize) -> Vec<(f64, f64)> {
    let mut peaks = Vec::new();
    for k in start.max(1)..db.len() - 1 {
        let (a, b, c) = (db[k - 1], db[k], db[k + 1]);
        if b >= a && b > c {
            let denom = a - 2.0 * b + c;
            let smooth = b - a < PEAK_REFINE_MAX_DB && b - c < PEAK_REFINE_MAX_DB;
            let p = if smooth && denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            peaks.push((k as f64 + p, b - 0.25 * (a - c) * p));
        }
    }
    peaks
}

/// Least-squares slope of level versus log2 frequency, in dB per octave.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (f, l)| (sx + f.log2(), sy + l));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), (f, l)| {
        let dx = f.log2() - mx;
        (sxy + dx * (l - my), sxx + dx * dx)
    });
    sxy / sxx
}

/// Asymptotic sidelobe decay: slope over the highest two-octave band of
/// sidelobe peaks that lies above the numerical floor and below an eighth of
/// the sampling rate, skipping the peaks nearest the main lobe.
fn decay_rate(peaks: &[(f64, f64)], oversample: usize, m: usize) -> f64 {
    let peaks: Vec<(f64, f64)> = peaks
        .iter()
        .skip(DECAY_SKIP_SIDELOBES)
        .map(|(k, l)| (k / oversample as f64, *l))
        .collect();
    let highest = peaks
        .iter()
        .filter(|(_, l)| *l > DECAY_FLOOR_DB)
        .map(|(f, _)| *f)
        .fold(0.0f64, f64::max);
    let top = highest.min(m as f64 / 8.0);
    let band: Vec<(f64, f64)> = peaks
        .iter()
        .copied()
        .filter(|(f, l)| *f >= top / 4.0 && *f <= top && *l > DECAY_FLOOR_DB)
        .collect();
    let band = if band.len() >= 3 { band } else { peaks };
    -loglog_slope(&band)
}

/// Computes sidelobe level, decay rate and second-moment duration and
/// bandwidth for a window kind. `oversample` is the zero-padding factor of
/// the transform (at least 16).
pub fn window_metrics(kind: WindowKind, oversample: usize) -> Result<WindowMetrics> {
    if oversample < 16 {
        return Err(Error::InvalidSpec(format!("oversample {oversample} below 16")));
    }
    let m = SHAPE_SAMPLES;
    let shape = unit_shape(kind, m)?;
    let gain = gain_spectrum(&shape, oversample);
    let db: Vec<f64> = gain.iter().map(|g| to_db(*g)).collect();

    let null = first_minimum(&gain);
    let peaks = sidelobe_peaks(&db, null);
    let max_sidelobe_db = peaks.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let decay_rate_db_per_oct = decay_rate(&peaks, oversample, m);

    let nominal = kind.nominal_length();
    // Time in fundamental periods with the window at nominal length.
    let dt = nominal / m as f64;
    let energy: f64 = shape.iter().map(|w| w * w).sum();
    let sigma_t = (shape
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let t = (i as f64 + 0.5 - m as f64 / 2.0) * dt;
            w * w * t * t
        })
        .sum::<f64>()
        / energy)
        .sqrt();

    // Bandwidth from the oversampled power spectrum, two-sided.
    let n = m * oversample;
    let df = 1.0 / (n as f64 * dt);
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, g) in gain.iter().enumerate() {
        let p = g * g;
        let weight = if k == 0 || (n % 2 == 0 && k == n / 2) { 1.0 } else { 2.0 };
        let f = k as f64 * df;
        num += weight * p * f * f;
        den += weight * p;
    }
    let sigma_f = (num / den).sqrt();

    Ok(WindowMetrics {
        kind,
        max_sidelobe_db,
        decay_rate_db_per_oct,
        nominal_length: nominal,
        measured_first_null: null as f64 / oversample as f64,
        sigma_t,
        sigma_f,
        sigma_t_ratio: sigma_t / SIGMA_T_RECT,
        sigma_f_ratio: sigma_f / SIGMA_F_RECT,
    })
}

/// First zero of the DPSS transform in cycles per window length, located by
/// bisection on the real-valued transform of the symmetric sequence.
pub(crate) fn dpss_first_null(nw: f64) -> f64 {
    let m = SHAPE_SAMPLES;
    let w = dpss(m, nw).expect("valid dpss parameters");
    let centre = (m as f64 - 1.0) / 2.0;
    let transform = |f: f64| -> f64 {
        w.iter()
            .enumerate()
            .map(|(i, v)| v * (2.0 * PI * f * (i as f64 - centre) / m as f64).cos())
            .sum()
    };
    let mut lo = nw * 0.9;
    let mut step_hi = lo;
    let v_lo = transform(lo);
    loop {
        step_hi += 0.01;
        if transform(step_hi).signum() != v_lo.signum() {
            break;
        }
        lo = step_hi;
        assert!(step_hi < nw * 2.0, "no zero crossing found");
    }
    let mut hi = step_hi;
    let s_lo = transform(lo).signum();
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if transform(mid).signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Window shape versus time in fundamental periods, at nominal length.
pub fn window_shape_curve(kind: WindowKind, points: usize) -> Result<Vec<(f64, f64)>> {
    if points < 2 {
        return Err(Error::InvalidSpec("need at least two curve points".into()));
    }
    let shape = unit_shape(kind, points)?;
    let nominal = kind.nominal_length();
    Ok(shape
        .into_iter()
        .enumerate()
        .map(|(i, w)| (((2 * i + 1) as f64 / points as f64 - 1.0) * nominal / 2.0, w))
        .collect())
}

/// Gain in dB versus frequency normalised to the fundamental (first zero at
/// one), up to `max_freq` fundamentals.
pub fn window_gain_curve(kind: WindowKind, oversample: usize, max_freq: f64) -> Result<Vec<(f64, f64)>> {
    if oversample < 16 {
        return Err(Error::InvalidSpec(format!("oversample {oversample} below 16")));
    }
    let m = 1024;
    let shape = unit_shape(kind, m)?;
    let gain = gain_spectrum(&shape, oversample);
    let scale = 1.0 / (oversample as f64 * kind.nominal_length());
    Ok(gain
        .iter()
        .enumerate()
        .map(|(k, g)| (k as f64 * scale, to_db(*g)))
        .take_while(|(f, _)| *f <= max_freq)
        .collect())
}

/// Closed-form Kaiser gain relative to its peak at `x = pi f L`.
#[cfg(test)]
fn kaiser_gain(beta: f64, x: f64) -> f64 {
    let peak = beta.sinh() / beta;
    let d = beta * beta - x * x;
    let v = if d > 0.0 {
        let r = d.sqrt();
        r.sinh() / r
    } else if d < 0.0 {
        let r = (-d).sqrt();
        r.sin() / r
    } else {
        1.0
    };
    v / peak
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_low_oversampling() {
        assert!(window_metrics(WindowKind::Hanning, 8).is_err());
    }

    #[test]
    fn zero_bins_do_not_inflate_peaks() {
        let db = [-50.0, -60.0, -300.0, -200.0, -6000.0, -82.0, -80.0, -81.0, -95.0];
        let peaks = sidelobe_peaks(&db, 1);
        assert_eq!(peaks[0], (3.0, -200.0));
        assert!(peaks[1].1 > -80.0 && peaks[1].1 < -79.5);
    }

    #[test]
    fn hanning_moments_are_closed_form() {
        // Hann at nominal length two: sigma_f = 1/sqrt(12) exactly; sigma_t by
        // direct integration of (1 + cos(pi t))^2 t^2 over [-1, 1].
        let m = window_metrics(WindowKind::Hanning, 16).unwrap();
        // Oracle via Simpson quadrature, independent of the sampled shape.
        let n = 20000;
        let h = 2.0 / n as f64;
        let simpson = |g: &dyn Fn(f64) -> f64| {
            (0..=n)
                .map(|i| {
                    let x = -1.0 + i as f64 * h;
                    let c = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    c * g(x)
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        let w2 = |x: f64| (0.5 + 0.5 * (PI * x).cos()).powi(2);
        let st = (simpson(&|x| w2(x) * x * x) / simpson(&w2)).sqrt();
        assert!((m.sigma_t - st).abs() < 1e-6, "{} vs {st}", m.sigma_t);
        assert!((m.sigma_f - 1.0 / 12f64.sqrt()).abs() / m.sigma_f < 2e-3, "{}", m.sigma_f);
    }

    #[test]
    fn kaiser_closed_form_sidelobe_matches_target() {
        let beta = kaiser_beta();
        // Scan the closed-form gain past the first null.
        let first_null = (PI * PI + beta * beta).sqrt();
        let max = (0..200_000)
            .map(|i| first_null + 1e-4 + i as f64 * 1e-4)
            .map(|x| kaiser_gain(beta, x).abs())
            .fold(0.0f64, f64::max);
        assert!((to_db(max) - KAISER_TARGET).abs() < 1e-3, "{}", to_db(max));
    }

    const KAISER_TARGET: f64 = super::super::KAISER_SIDELOBE_DB;

    #[test]
    fn gain_curve_first_zero_at_unity() {
        for kind in [WindowKind::Hanning, WindowKind::SixTerm] {
            let curve = window_gain_curve(kind, 32, 3.0).unwrap();
            let (f, _) = curve
                .iter()
                .skip(1)
                .zip(curve.iter().skip(2))
                .find(|(a, b)| b.1 > a.1)
                .map(|(a, _)| *a)
                .unwrap();
            assert!((f - 1.0).abs() < 0.01, "{kind}: {f}");
        }
    }

    #[test]
    fn shape_curve_spans_nominal_length() {
        let c = window_shape_curve(WindowKind::Blackman, 101).unwrap();
        assert!((c[0].0 + 1.5).abs() < 0.02);
        assert!((c[50].1 - 1.0).abs() < 1e-12);
    }
}
