use crate::dsp::{correlate_at, Complex64, WaveformFrame};
use crate::error::{Error, Result};

/// Peak-to-sidelobe ratio below which synchronization is declared failed.
pub const SYNC_PSL_THRESHOLD: f64 = 3.0;

/// Training symbols used for the correlation search.
const SYNC_SYMBOLS: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct SyncResult {
    /// Integer delay of the received frame relative to the training waveform, in samples.
    pub offset: isize,
    /// One entry per received channel; all equal the global offset.
    pub offsets: Vec<isize>,
    pub peak_to_sidelobe: f64,
}

fn remove_mean(x: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() {
        return Vec::new();
    }
    let m = x.iter().sum::<Complex64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

/// Global frame offset: the lag maximizing the correlation energy summed over
/// every (received channel, training waveform) pair.
///
/// `training` holds each transmitted channel's shaped training waveform at the
/// receiver's sample rate. Lags in `[-max_lag, max_lag]` are searched.
pub fn frame_sync(
    rx: &WaveformFrame,
    training: &[Vec<Complex64>],
    max_lag: usize,
) -> Result<SyncResult> {
    if training.is_empty() || training.iter().any(|t| t.is_empty()) {
        return Err(Error::Parameter("empty training waveform".into()));
    }
    let sps = rx.samples_per_symbol();
    let n_train = training.iter().map(|t| t.len()).min().unwrap_or(0);
    if n_train < 256 * sps {
        return Err(Error::Parameter(format!(
            "training waveform of {n_train} samples is shorter than 256 symbols"
        )));
    }
    let seg = n_train.min(SYNC_SYMBOLS * sps);
    if max_lag + seg >= rx.len() {
        return Err(Error::Parameter(format!(
            "sync search of {max_lag} lags does not fit a {}-sample frame",
            rx.len()
        )));
    }
    let templates: Vec<&[Complex64]> = training.iter().map(|t| &t[..seg]).collect();
    let received: Vec<Vec<Complex64>> = rx.channels().iter().map(|c| remove_mean(c)).collect();
    let lags: Vec<isize> = (-(max_lag as isize)..=max_lag as isize).collect();
    let metric: Vec<f64> = lags
        .iter()
        .map(|&lag| {
            received
                .iter()
                .flat_map(|r| {
                    templates
                        .iter()
                        .map(move |t| correlate_at(t, r, lag).norm_sqr())
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let (best, &peak) = metric
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty lag range");
    let guard = 2 * sps as isize;
    let sidelobe = lags
        .iter()
        .zip(&metric)
        .filter(|(l, _)| (**l - lags[best]).abs() > guard)
        .map(|(_, m)| *m)
        .fold(0.0, f64::max);
    let psl = if sidelobe > 0.0 {
        peak / sidelobe
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if !(psl >= SYNC_PSL_THRESHOLD) {
        return Err(Error::SyncFailure {
            ratio: psl,
            threshold: SYNC_PSL_THRESHOLD,
        });
    }
    let offset = lags[best];
    Ok(SyncResult {
        offset,
        offsets: vec![offset; rx.n_channels()],
        peak_to_sidelobe: psl,
    })
}
