use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Windowed-sinc interpolator order (taps = order + 1).
pub const FRACTIONAL_DELAY_ORDER: usize = 32;
const KAISER_BETA: f64 = 7.0;

/// Linear convolution cropped to `x.len()` with the filter's center tap
/// `(h.len() - 1) / 2` aligned to the input, i.e. group delay removed.
pub fn convolve_same(x: &[Complex64], h: &[f64]) -> Result<Vec<Complex64>> {
    if h.is_empty() {
        return Err(Error::Parameter("empty filter".into()));
    }
    let c = (h.len() - 1) / 2;
    let n = x.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, o) in out.iter_mut().enumerate() {
        // out[i] = sum_k h[k] x[i + c - k]
        let k_lo = (i + c + 1).saturating_sub(n);
        let k_hi = (i + c).min(h.len() - 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in k_lo..=k_hi {
            acc += x[i + c - k] * h[k];
        }
        *o = acc;
    }
    Ok(out)
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc taps for a fractional shift `frac` in [-0.5, 0.5].
///
/// Tap `j` (0-based, `j = 0..=order`) weights input sample `n - (j - order/2)`.
/// Taps are normalized to unit DC gain.
pub fn kaiser_sinc_taps(frac: f64, order: usize) -> Vec<f64> {
    let half = (order / 2) as isize;
    let support = half as f64 + 1.0;
    let i0b = bessel_i0(KAISER_BETA);
    let mut taps: Vec<f64> = (-half..=half)
        .map(|j| {
            let t = j as f64 - frac;
            let sinc = if t.abs() < 1e-15 {
                1.0
            } else {
                (PI * t).sin() / (PI * t)
            };
            let r = (t / support).clamp(-1.0, 1.0);
            sinc * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0b
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    taps
}

/// Delays `x` by `delay` samples (positive = later), zero-filling the edge.
///
/// Integer part by shift, remainder by a Kaiser-windowed sinc of order
/// [`FRACTIONAL_DELAY_ORDER`].
pub fn fractional_delay(x: &[Complex64], delay: f64) -> Result<Vec<Complex64>> {
    let n = x.len();
    if !delay.is_finite() || delay.abs() >= n as f64 / 4.0 {
        return Err(Error::Parameter(format!(
            "delay {delay} too large for {n} samples"
        )));
    }
    let shift = delay.round();
    let frac = delay - shift;
    let shift = shift as isize;
    let zero = Complex64::new(0.0, 0.0);
    let at = |i: isize| -> Complex64 {
        if i >= 0 && (i as usize) < n {
            x[i as usize]
        } else {
            zero
        }
    };
    if frac.abs() < 1e-12 {
        return Ok((0..n as isize).map(|i| at(i - shift)).collect());
    }
    let taps = kaiser_sinc_taps(frac, FRACTIONAL_DELAY_ORDER);
    let half = (FRACTIONAL_DELAY_ORDER / 2) as isize;
    Ok((0..n as isize)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(j, &w)| at(i - shift - (j as isize - half)) * w)
                .sum()
        })
        .collect())
}

#[cfg(test)]
pub(crate) use tests::bandlimited;
