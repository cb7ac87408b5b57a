use num_complex::Complex64;

use crate::error::{Error, Result};

/// Location and height of a cross-correlation peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPeak {
    /// Delay of `b` relative to `a`, in samples, parabolically refined.
    pub lag: f64,
    /// |correlation| at the integer peak.
    pub magnitude: f64,
    /// Integer lag of the largest magnitude.
    pub integer_lag: isize,
}

/// Correlation `sum_t a(t) conj(b(t + lag))` for one integer lag.
pub(crate) fn correlate_at(a: &[Complex64], b: &[Complex64], lag: isize) -> Complex64 {
    let n = a.len() as isize;
    let m = b.len() as isize;
    let t_lo = 0.max(-lag);
    let t_hi = n.min(m - lag);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut t = t_lo;
    while t < t_hi {
        acc += a[t as usize] * b[(t + lag) as usize].conj();
        t += 1;
    }
    acc
}

/// Finds the delay of `b` with respect to `a` within `[-max_lag, max_lag]`.
///
/// If `b(t) = a(t - d)` the result is `lag ≈ d`. The integer peak of the
/// correlation magnitude is refined by a parabola through its neighbours.
pub fn xcorr_peak(a: &[Complex64], b: &[Complex64], max_lag: usize) -> Result<CorrelationPeak> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("empty sequence".into()));
    }
    if max_lag >= a.len().min(b.len()) {
        return Err(Error::Parameter(format!(
            "max lag {max_lag} not below sequence length"
        )));
    }
    peak_over(a, b, -(max_lag as isize), max_lag as isize)
}

/// Like [`xcorr_peak`] but searches `[center - half_width, center + half_width]`.
pub fn xcorr_peak_around(
    a: &[Complex64],
    b: &[Complex64],
    center: isize,
    half_width: usize,
) -> Result<CorrelationPeak> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("empty sequence".into()));
    }
    let lo = center - half_width as isize;
    let hi = center + half_width as isize;
    let n = a.len().min(b.len()) as isize;
    if lo <= -n || hi >= n {
        return Err(Error::Parameter(format!(
            "lag window [{lo}, {hi}] exceeds sequence length"
        )));
    }
    peak_over(a, b, lo, hi)
}

fn peak_over(a: &[Complex64], b: &[Complex64], lo: isize, hi: isize) -> Result<CorrelationPeak> {
    let lags: Vec<isize> = (lo..=hi).collect();
    let mags: Vec<f64> = lags.iter().map(|&l| correlate_at(a, b, l).norm()).collect();
    let (best, &peak) = mags
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty lag range");
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::NoPeak("correlation is identically zero".into()));
    }
    let mut lag = lags[best] as f64;
    if best > 0 && best + 1 < mags.len() {
        let (l, c, r) = (mags[best - 1], mags[best], mags[best + 1]);
        let den = l - 2.0 * c + r;
        if den.abs() > f64::EPSILON * c {
            lag += (0.5 * (l - r) / den).clamp(-0.5, 0.5);
        }
    }
    Ok(CorrelationPeak {
        lag,
        magnitude: peak,
        integer_lag: lags[best],
    })
}
