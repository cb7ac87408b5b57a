//! Transmitter: mode-multiplexed QPSK signal channels plus a CW pilot tone.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::dsp::{convolve_same, rrc_design, Complex64, RrcFilter, SimRng, WaveformFrame};
use crate::error::{Error, Result};
use crate::units::{db_serde, dbm_to_power};

/// Label carried by the pilot-tone channel of a transmitted frame.
pub const PT_LABEL: &str = "PT";

/// Stream ids used to derive per-channel bit sources from the transmitter seed.
const PAYLOAD_STREAM: u64 = 0;
const TRAINING_STREAM: u64 = 1 << 32;

fn default_span() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxConfig {
    /// Baud.
    pub symbol_rate: f64,
    pub n_signal_channels: usize,
    pub samples_per_symbol: usize,
    pub n_symbols: usize,
    pub roll_off: f64,
    #[serde(default = "default_span")]
    pub rrc_span_symbols: usize,
    /// Per-channel average signal power; `-inf` switches the signals off.
    #[serde(with = "db_serde")]
    pub signal_power_dbm: f64,
    #[serde(with = "db_serde")]
    pub pt_power_dbm: f64,
    pub training_length: usize,
    pub seed: u64,
    /// Signal channel labels; defaults to `S0, S1, ...`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_labels: Option<Vec<String>>,
}

impl TxConfig {
    /// Pilot-to-signal power ratio set at the transmitter, in dB.
    pub fn pspr_tx_db(&self) -> f64 {
        self.pt_power_dbm - self.signal_power_dbm
    }

    /// Aggregate line rate over all signal channels (2 bits per QPSK symbol).
    pub fn aggregate_bit_rate(&self) -> f64 {
        self.n_signal_channels as f64 * 2.0 * self.symbol_rate
    }

    pub fn labels(&self) -> Vec<String> {
        match &self.signal_labels {
            Some(l) => l.clone(),
            None => (0..self.n_signal_channels).map(|i| format!("S{i}")).collect(),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_signal_channels == 0 {
            v.push("tx.n_signal_channels must be >= 1".to_string());
        }
        if self.training_length >= self.n_symbols {
            v.push(format!(
                "tx.n_symbols ({}) must exceed tx.training_length ({})",
                self.n_symbols, self.training_length
            ));
        }
        if self.samples_per_symbol == 0 {
            v.push("tx.samples_per_symbol must be >= 1".into());
        }
        if !(self.symbol_rate.is_finite() && self.symbol_rate > 0.0) {
            v.push(format!("tx.symbol_rate {} must be positive", self.symbol_rate));
        }
        if !(self.roll_off > 0.0 && self.roll_off <= 1.0) {
            v.push(format!("tx.roll_off {} outside (0, 1]", self.roll_off));
        }
        if self.rrc_span_symbols == 0 || !self.rrc_span_symbols.is_multiple_of(2) {
            v.push("tx.rrc_span_symbols must be even and positive".into());
        }
        if !self.pt_power_dbm.is_finite() {
            v.push("tx.pt_power_dbm must be finite".into());
        }
        if self.signal_power_dbm.is_nan() || self.signal_power_dbm == f64::INFINITY {
            v.push("tx.signal_power_dbm must be finite or -inf".into());
        }
        if let Some(l) = &self.signal_labels {
            if l.len() != self.n_signal_channels {
                v.push(format!(
                    "tx.signal_labels has {} entries for {} channels",
                    l.len(),
                    self.n_signal_channels
                ));
            }
            if l.iter().any(|s| s == PT_LABEL) {
                v.push(format!("tx.signal_labels may not use {PT_LABEL:?}"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    pub fn shaping_filter(&self) -> Result<RrcFilter> {
        rrc_design(self.roll_off, self.rrc_span_symbols, self.samples_per_symbol)
    }
}

/// Everything the transmitter emitted, kept for BER counting and genie feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct TxRecord {
    /// Per-channel bits, two per symbol, training included.
    pub bits: Vec<Vec<u8>>,
    /// Per-channel unit-power QPSK symbols.
    pub symbols: Vec<Vec<Complex64>>,
    /// Signal channels followed by the pilot channel labelled [`PT_LABEL`].
    pub frame: WaveformFrame,
    pub training_length: usize,
    pub shaping: RrcFilter,
}

impl TxRecord {
    pub fn n_signal_channels(&self) -> usize {
        self.symbols.len()
    }

    pub fn training_symbols(&self) -> Vec<Vec<Complex64>> {
        self.symbols
            .iter()
            .map(|s| s[..self.training_length].to_vec())
            .collect()
    }
}

/// Gray-mapped QPSK: 00 -> (+1+j), 01 -> (-1+j), 11 -> (-1-j), 10 -> (+1-j), all over sqrt(2).
///
/// The first bit of a pair selects the sign of the imaginary part, the
/// second the sign of the real part.
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::Parameter(format!("odd bit count {}", bits.len())));
    }
    Ok(bits
        .chunks_exact(2)
        .map(|p| {
            let re = if p[1] == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            let im = if p[0] == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            Complex64::new(re, im)
        })
        .collect())
}

/// Hard-decision inverse of [`qpsk_map`]; zero components decide toward +.
pub fn qpsk_demap(symbols: &[Complex64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        out.push(u8::from(s.im < 0.0));
        out.push(u8::from(s.re < 0.0));
    }
    out
}

/// Nearest QPSK constellation point.
pub fn qpsk_slice(s: Complex64) -> Complex64 {
    Complex64::new(
        if s.re < 0.0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 },
        if s.im < 0.0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 },
    )
}

/// Pulse-shapes symbols at `sps` so that unit-power symbols give unit mean-square samples.
///
/// Symbol `n` is centered on sample `n * sps`.
pub fn shape_symbols(symbols: &[Complex64], filter: &RrcFilter) -> Result<Vec<Complex64>> {
    let sps = filter.samples_per_symbol;
    let mut up = vec![Complex64::new(0.0, 0.0); symbols.len() * sps];
    let gain = (sps as f64).sqrt();
    for (i, s) in symbols.iter().enumerate() {
        up[i * sps] = s * gain;
    }
    convolve_same(&up, &filter.taps)
}

/// Channel `ch`'s training bits, reproducible from the transmitter seed alone.
pub fn training_bits(seed: u64, ch: usize, training_length: usize) -> Vec<u8> {
    SimRng::stream(seed, TRAINING_STREAM + ch as u64).bits(2 * training_length)
}

pub fn generate_tx(cfg: &TxConfig) -> Result<TxRecord> {
    cfg.validate()?;
    let shaping = cfg.shaping_filter()?;
    let n_payload = cfg.n_symbols - cfg.training_length;
    let amp = dbm_to_power(cfg.signal_power_dbm).sqrt();
    let mut bits = Vec::with_capacity(cfg.n_signal_channels);
    let mut symbols = Vec::with_capacity(cfg.n_signal_channels);
    let mut channels = Vec::with_capacity(cfg.n_signal_channels + 1);
    for ch in 0..cfg.n_signal_channels {
        let mut b = training_bits(cfg.seed, ch, cfg.training_length);
        b.extend(SimRng::stream(cfg.seed, PAYLOAD_STREAM + ch as u64).bits(2 * n_payload));
        let s = qpsk_map(&b)?;
        let mut w = shape_symbols(&s, &shaping)?;
        w.iter_mut().for_each(|v| *v *= amp);
        bits.push(b);
        symbols.push(s);
        channels.push(w);
    }
    let n_samples = cfg.n_symbols * cfg.samples_per_symbol;
    let pt = Complex64::new(dbm_to_power(cfg.pt_power_dbm).sqrt(), 0.0);
    channels.push(vec![pt; n_samples]);
    let mut labels = cfg.labels();
    labels.push(PT_LABEL.to_string());
    let frame = WaveformFrame::new(
        channels,
        cfg.symbol_rate * cfg.samples_per_symbol as f64,
        cfg.samples_per_symbol,
        labels,
    )?;
    Ok(TxRecord {
        bits,
        symbols,
        frame,
        training_length: cfg.training_length,
        shaping,
    })
}
