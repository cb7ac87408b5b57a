use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Unit-energy, even-symmetric root-raised-cosine FIR.
#[derive(Debug, Clone, PartialEq)]
pub struct RrcFilter {
    pub roll_off: f64,
    pub span_symbols: usize,
    pub samples_per_symbol: usize,
    pub taps: Vec<f64>,
}

impl RrcFilter {
    /// Index of the center tap; this is also the filter's group delay in samples.
    pub fn center(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

/// Designs a root-raised-cosine filter with `span_symbols * sps + 1` taps.
///
/// The closed-form impulse response is truncated to the span. At four or more
/// samples per symbol the taps are then nudged onto the nearest symmetric
/// filter whose matched cascade is exactly zero at every nonzero symbol
/// instant; truncating a small roll-off RRC otherwise leaves residual ISI of
/// order 1e-2.
pub fn rrc_design(roll_off: f64, span_symbols: usize, sps: usize) -> Result<RrcFilter> {
    if !(roll_off > 0.0 && roll_off <= 1.0) {
        return Err(Error::Parameter(format!("roll-off {roll_off} outside (0, 1]")));
    }
    if span_symbols == 0 || !span_symbols.is_multiple_of(2) {
        return Err(Error::Parameter(format!(
            "span {span_symbols} must be even and positive"
        )));
    }
    if sps == 0 {
        return Err(Error::Parameter("samples per symbol must be >= 1".into()));
    }
    let half = (span_symbols * sps / 2) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|n| rrc_impulse(n as f64 / sps as f64, roll_off))
        .collect();
    normalize(&mut taps);
    if sps >= 4 {
        enforce_nyquist(&mut taps, sps, span_symbols);
        // exact mirror to wipe out rounding asymmetry
        let l = taps.len();
        for k in 0..l / 2 {
            let m = 0.5 * (taps[k] + taps[l - 1 - k]);
            taps[k] = m;
            taps[l - 1 - k] = m;
        }
        normalize(&mut taps);
    }
    Ok(RrcFilter {
        roll_off,
        span_symbols,
        samples_per_symbol: sps,
        taps,
    })
}

/// Continuous RRC pulse at time `t` in symbol periods (unnormalized).
fn rrc_impulse(t: f64, beta: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let singular = 1.0 / (4.0 * beta);
    if (t.abs() - singular).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

fn normalize(taps: &mut [f64]) {
    let e: f64 = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= e);
}

/// Autocorrelation of real taps at lag `m`.
fn autocorr(h: &[f64], m: usize) -> f64 {
    h[..h.len() - m].iter().zip(&h[m..]).map(|(a, b)| a * b).sum()
}

/// Drives the cascade h*h to zero at lags sps, 2*sps, ... while staying close
/// to the starting taps. A few projection steps anchored at the start point
/// are followed by minimum-norm Gauss-Newton polishing.
fn enforce_nyquist(h: &mut [f64], sps: usize, span: usize) {
    let l = h.len();
    let c0 = (l - 1) / 2;
    let lags: Vec<usize> = (1..=span).map(|n| n * sps).filter(|&m| m < l).collect();
    let start = h.to_vec();
    // symmetric parametrization: h[j] = p[min(j, l-1-j)]
    let param = |j: usize| j.min(l - 1 - j);
    for iter in 0..120 {
        let c = DVector::from_iterator(lags.len(), lags.iter().map(|&m| autocorr(h, m)));
        if c.amax() < 1e-15 {
            break;
        }
        let mut jac = DMatrix::<f64>::zeros(lags.len(), c0 + 1);
        for (row, &m) in lags.iter().enumerate() {
            for j in 0..l {
                let mut v = 0.0;
                if j + m < l {
                    v += h[j + m];
                }
                if j >= m {
                    v += h[j - m];
                }
                jac[(row, param(j))] += v;
            }
        }
        let svd = jac.clone().svd(true, true);
        let step = if iter < 8 {
            let g = DVector::from_iterator(c0 + 1, (0..=c0).map(|j| start[j] - h[j]));
            let rhs = &c + &jac * &g;
            match svd.solve(&rhs, 1e-12) {
                Ok(x) => g - x,
                Err(_) => break,
            }
        } else {
            match svd.solve(&c, 1e-12) {
                Ok(x) => -x,
                Err(_) => break,
            }
        };
        for j in 0..l {
            h[j] += step[param(j)];
        }
    }
}
