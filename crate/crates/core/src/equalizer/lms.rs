use crate::dsp::Complex64;
use crate::error::{Error, Result};
use crate::txgen::qpsk_slice;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Symbols averaged for the reference MSE of the divergence detector.
const INITIAL_WINDOW: usize = 256;
/// Smoothing constant of the running MSE.
const EMA_ALPHA: f64 = 0.01;
const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_RUN: usize = 1000;
/// Floor on the reference MSE so that near-perfect starts do not trip the detector.
const MSE_FLOOR: f64 = 1e-2;

pub(crate) struct LmsInput<'a> {
    pub branches: &'a [Vec<Complex64>],
    pub tap_counts: &'a [usize],
    pub sps: usize,
    pub offset: isize,
    pub n_symbols: usize,
    /// Known symbols per output for the training phase.
    pub training: &'a [Vec<Complex64>],
    pub training_length: usize,
    pub mu_train: f64,
    pub mu_dd: f64,
}

pub(crate) struct LmsRun {
    /// A-priori equalizer outputs `[output][symbol]`.
    pub outputs: Vec<Vec<Complex64>>,
    /// Per-symbol squared error averaged over outputs.
    pub mse: Vec<f64>,
    /// Mean squared error over the last training symbols.
    pub training_mse: f64,
}

/// Butterfly FIR adapted by LMS. `taps[o]` is the flattened tap vector of
/// output `o`, branches concatenated in `tap_counts` order.
pub(crate) fn run_lms(input: &LmsInput, taps: &mut [Vec<Complex64>]) -> Result<LmsRun> {
    let total: usize = input.tap_counts.iter().sum();
    assert!(taps.iter().all(|t| t.len() == total));
    let n_out = taps.len();
    let mut x = vec![ZERO; total];
    let mut outputs = vec![Vec::with_capacity(input.n_symbols); n_out];
    let mut mse = Vec::with_capacity(input.n_symbols);
    let mut ema = vec![0.0; n_out];
    let mut initial = vec![0.0; n_out];
    let mut run = vec![0usize; n_out];
    let tail = input.training_length.min(1000);
    let mut train_acc = 0.0;
    for n in 0..input.n_symbols {
        let s = (input.sps * n) as isize + input.offset;
        let mut pos = 0;
        for (b, sig) in input.branches.iter().enumerate() {
            let len = input.tap_counts[b];
            let c = (len / 2) as isize;
            for k in 0..len {
                let idx = s - c + k as isize;
                x[pos + k] = if idx >= 0 && (idx as usize) < sig.len() {
                    sig[idx as usize]
                } else {
                    ZERO
                };
            }
            pos += len;
        }
        let training = n < input.training_length;
        let mu = if training { input.mu_train } else { input.mu_dd };
        let mut err_acc = 0.0;
        for o in 0..n_out {
            let w = &mut taps[o];
            let y: Complex64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
            if !y.is_finite() {
                return Err(Error::Divergence {
                    output: o,
                    symbol: n,
                });
            }
            let d = if training {
                input.training[o][n]
            } else {
                qpsk_slice(y)
            };
            let e = d - y;
            let mu_e = mu * e;
            for (wi, xi) in w.iter_mut().zip(&x) {
                *wi += mu_e * xi.conj();
            }
            let e2 = e.norm_sqr();
            err_acc += e2;
            outputs[o].push(y);

            if n < INITIAL_WINDOW {
                initial[o] += e2 / INITIAL_WINDOW as f64;
                ema[o] = if n == 0 { e2 } else { ema[o] + EMA_ALPHA * (e2 - ema[o]) };
            } else {
                ema[o] += EMA_ALPHA * (e2 - ema[o]);
                if ema[o] > DIVERGENCE_FACTOR * initial[o].max(MSE_FLOOR) {
                    run[o] += 1;
                    if run[o] >= DIVERGENCE_RUN {
                        return Err(Error::Divergence {
                            output: o,
                            symbol: n,
                        });
                    }
                } else {
                    run[o] = 0;
                }
            }
        }
        let m = err_acc / n_out as f64;
        if training && n + tail >= input.training_length {
            train_acc += m;
        }
        mse.push(m);
    }
    Ok(LmsRun {
        outputs,
        mse,
        training_mse: if tail > 0 { train_acc / tail as f64 } else { f64::NAN },
    })
}
