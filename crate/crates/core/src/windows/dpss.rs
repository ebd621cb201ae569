use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Zeroth-order discrete prolate spheroidal sequence of length `len` with
/// time-half-bandwidth product `nw`, scaled to a peak of one.
///
/// This is the dominant eigenvector of the symmetric tridiagonal matrix that
/// commutes with the prolate concentration operator:
/// diagonal `((len - 1 - 2n) / 2)^2 cos(2 pi nw / len)`,
/// off-diagonal `(n + 1)(len - n - 1) / 2`.
pub fn dpss(len: usize, nw: f64) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(Error::InvalidSpec(format!("dpss length {len} too short")));
    }
    if !(nw > 0.0 && nw < len as f64 / 2.0) {
        return Err(Error::InvalidSpec(format!("dpss nw = {nw} out of range for length {len}")));
    }
    let n = len;
    let cw = (2.0 * PI * nw / n as f64).cos();
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let c = (n as f64 - 1.0 - 2.0 * i as f64) / 2.0;
            c * c * cw
        })
        .collect();
    let off: Vec<f64> = (0..n - 1)
        .map(|i| (i as f64 + 1.0) * (n as f64 - i as f64 - 1.0) / 2.0)
        .collect();

    let lambda = largest_eigenvalue(&diag, &off);
    let scale = diag.iter().chain(off.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
    let shift = lambda + scale * 1e-10;

    // Inverse iteration on (shift I - T), which is positive definite.
    let mut v = vec![1.0; n];
    for _ in 0..6 {
        v = solve_shifted(&diag, &off, shift, &v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
    }
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let peak = v.iter().fold(0.0f64, |m, x| m.max((sign * x).abs()));
    Ok(v.into_iter().map(|x| sign * x / peak).collect())
}

/// Number of eigenvalues strictly below `x` (Sturm sequence).
fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let prev = if q == 0.0 { f64::EPSILON * off[i - 1].abs().max(1.0) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn largest_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(diag, off, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Solves `(shift I - T) y = b` by the Thomas algorithm.
fn solve_shifted(diag: &[f64], off: &[f64], shift: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut denom = shift - diag[0];
    c[0] = if n > 1 { -off[0] / denom } else { 0.0 };
    y[0] = b[0] / denom;
    for i in 1..n {
        let sub = -off[i - 1];
        denom = shift - diag[i] - sub * c[i - 1];
        if i + 1 < n {
            c[i] = -off[i] / denom;
        }
        y[i] = (b[i] - sub * y[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        y[i] -= c[i] * y[i + 1];
    }
    y
}
