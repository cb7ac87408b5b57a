use crate::dsp::{fractional_delay, xcorr_peak_around, Complex64, RrcFilter};
use crate::error::{Error, Result};
use crate::txgen::shape_symbols;

use super::{BranchDescriptor, BranchKind, EqualizerConfig, UpicOrder};

/// Samples used for skew estimation.
const ESTIMATION_SAMPLES: usize = 1 << 15;
/// Normalized correlation must exceed this many noise-floor standard deviations.
const SIGNIFICANCE_SIGMAS: f64 = 5.0;

/// UPIC reference branches in catalog order: first-order, second-order, DC.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    pub catalog: Vec<BranchDescriptor>,
    pub waveforms: Vec<Vec<Complex64>>,
    /// Estimated delay of each channel's signal-port copy, absolute samples.
    pub signal_delays: Vec<f64>,
    /// Estimated delay of each channel's LO-port copy, absolute samples.
    pub lo_delays: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Estimate {
    lag: f64,
    significant: bool,
}

fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Strongest alignment of `reference` against any received branch within
/// `half_width` samples of `center`.
fn best_alignment(
    reference: &[Complex64],
    received: &[Vec<Complex64>],
    center: isize,
    half_width: usize,
    sps: usize,
) -> Result<Estimate> {
    let n = ESTIMATION_SAMPLES.min(reference.len());
    let a = &reference[..n];
    let na = norm(a);
    let mut best: Option<(f64, f64)> = None;
    for r in received {
        let b = &r[..n.min(r.len())];
        let nb = norm(b);
        if na == 0.0 || nb == 0.0 {
            continue;
        }
        match xcorr_peak_around(a, b, center, half_width) {
            Ok(p) => {
                let rho = p.magnitude / (na * nb);
                if best.is_none_or(|(r0, _)| rho > r0) {
                    best = Some((rho, p.lag));
                }
            }
            Err(Error::NoPeak(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let floor = SIGNIFICANCE_SIGMAS / ((n / sps.max(1)) as f64).sqrt();
    Ok(match best {
        Some((rho, lag)) => Estimate {
            lag,
            significant: rho > floor,
        },
        None => Estimate {
            lag: center as f64,
            significant: false,
        },
    })
}

fn check_range(branch: String, lag: f64, center: isize, cfg: &EqualizerConfig) -> Result<()> {
    let limit = cfg.taps_per_branch as f64 / 2.0;
    let skew = lag - center as f64;
    if skew.abs() > limit {
        return Err(Error::SkewOutOfRange {
            branch,
            estimate: skew,
            limit,
        });
    }
    Ok(())
}

/// Regenerates each channel's waveform from feedback symbols and derives the
/// interference references, each delayed to line up with its image in the
/// received branches.
///
/// `received` are the front-end filtered received branches and `sync_offset`
/// the frame offset they were synchronized at. The returned waveforms are
/// unfiltered; the caller applies the same front end as to the received branches.
pub fn build_upic_references(
    feedback: &[Vec<Complex64>],
    received: &[Vec<Complex64>],
    sync_offset: isize,
    cfg: &EqualizerConfig,
    shaping: &RrcFilter,
) -> Result<ReferenceSet> {
    if feedback.iter().any(|f| f.len() < cfg.training_length) {
        return Err(Error::Parameter(
            "feedback shorter than the training length".into(),
        ));
    }
    let sps = shaping.samples_per_symbol;
    let half = cfg.taps_per_branch;
    let mut signal_delays = Vec::with_capacity(feedback.len());
    let mut lo_delays = Vec::with_capacity(feedback.len());
    let mut sig_copies = Vec::with_capacity(feedback.len());
    let mut lo_copies = Vec::with_capacity(feedback.len());
    for (k, symbols) in feedback.iter().enumerate() {
        let r = shape_symbols(symbols, shaping)?;
        let s_est = best_alignment(&r, received, sync_offset, half, sps)?;
        let s_lag = if s_est.significant {
            check_range(format!("signal copy of channel {k}"), s_est.lag, sync_offset, cfg)?;
            s_est.lag
        } else {
            sync_offset as f64
        };
        let rc: Vec<Complex64> = r.iter().map(|v| v.conj()).collect();
        let l_est = best_alignment(&rc, received, sync_offset, half, sps)?;
        let l_lag = if l_est.significant {
            check_range(format!("LO copy of channel {k}"), l_est.lag, sync_offset, cfg)?;
            l_est.lag
        } else {
            s_lag
        };
        sig_copies.push(fractional_delay(&r, s_lag)?);
        lo_copies.push(fractional_delay(&r, l_lag)?);
        signal_delays.push(s_lag);
        lo_delays.push(l_lag);
    }

    let mut catalog = Vec::new();
    let mut waveforms = Vec::new();
    if cfg.upic_order == UpicOrder::Off {
        return Ok(ReferenceSet {
            catalog,
            waveforms,
            signal_delays,
            lo_delays,
        });
    }
    let n = feedback.len();
    let len = lo_copies.first().map_or(0, |c| c.len());
    let off = sync_offset as f64;
    for k in 0..n {
        catalog.push(BranchDescriptor {
            kind: BranchKind::FirstOrder { channel: k },
            skew_applied: lo_delays[k] - off,
            taps: cfg.ref_taps_per_branch,
        });
        waveforms.push(lo_copies[k].iter().map(|v| v.conj()).collect());
    }
    if cfg.upic_order == UpicOrder::FirstAndSecond {
        for (a, b) in cfg.pairs() {
            let mut w: Vec<Complex64> = sig_copies[a]
                .iter()
                .zip(&lo_copies[b])
                .map(|(x, y)| x * y.conj())
                .collect();
            // the constant part belongs to the DC branch
            let m = w.iter().sum::<Complex64>() / len.max(1) as f64;
            w.iter_mut().for_each(|v| *v -= m);
            catalog.push(BranchDescriptor {
                kind: BranchKind::SecondOrder { a, b },
                skew_applied: lo_delays[b] - off,
                taps: cfg.ref_taps_per_branch,
            });
            waveforms.push(w);
        }
    }
    catalog.push(BranchDescriptor {
        kind: BranchKind::Dc,
        skew_applied: 0.0,
        taps: 1,
    });
    waveforms.push(vec![Complex64::new(1.0, 0.0); len]);
    Ok(ReferenceSet {
        catalog,
        waveforms,
        signal_delays,
        lo_delays,
    })
}
