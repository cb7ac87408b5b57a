//! Parametric linear mode-coupling channel.
//!
//! Channels are ordered signal channels first, pilot channels last. The same
//! ordering and labels are used for the transmitter-side inputs and the
//! receiver-side ports.

mod coupler;
mod io;
mod mmf;

pub use coupler::{build_coupler_channel, CouplerSpec};
pub use io::{ChannelDocument, CHANNEL_SCHEMA_VERSION};
pub use mmf::{build_mmf_channel, mmf_labels, MmfSpec};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dsp::{fractional_delay, Complex64, SimRng, WaveformFrame};
use crate::error::{Error, Result};
use crate::txgen::PT_LABEL;
use crate::units::{db_serde, dbm_to_power};

pub type CMatrix = DMatrix<Complex64>;

/// Physical impairments layered on top of a transfer matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Impairments {
    /// Per-input delay in samples, applied before mixing. Empty means zero.
    #[serde(default)]
    pub skews: Vec<f64>,
    /// Per-port delay in samples, applied after mixing (receiver-side fibre paths).
    #[serde(default)]
    pub port_skews: Vec<f64>,
    /// Combined laser linewidth.
    #[serde(default)]
    pub linewidth_hz: f64,
    /// Extra delay of the pilot path relative to the signal path, seconds.
    #[serde(default)]
    pub differential_path_delay_s: f64,
    /// AWGN per port at the receiver input; `-inf` disables it.
    #[serde(with = "db_serde", default = "neg_inf")]
    pub noise_power_dbm: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

impl Default for Impairments {
    fn default() -> Self {
        Self {
            skews: Vec::new(),
            port_skews: Vec::new(),
            linewidth_hz: 0.0,
            differential_path_delay_s: 0.0,
            noise_power_dbm: f64::NEG_INFINITY,
        }
    }
}

/// Complex field transfer matrix plus skew, phase-noise and noise settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub labels: Vec<String>,
    /// Indices (into `labels`) of the channels that carry the pilot tone.
    pub pilot_channels: Vec<usize>,
    /// H, M x M; output port p = sum_q H[p, q] input q.
    pub transfer: CMatrix,
    /// Diagonal mode-dependent-loss gains applied on the output side of H.
    pub mdl_gains: Vec<f64>,
    pub mdl_db: f64,
    pub seed: u64,
    pub impairments: Impairments,
}

/// Field at every receiver port, split by where the light came from.
///
/// `signal` also carries the receiver-input AWGN. Because propagation is
/// linear the two parts sum to the physical field.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedField {
    pub signal: WaveformFrame,
    pub pilot: WaveformFrame,
}

impl ReceivedField {
    pub fn total(&self) -> WaveformFrame {
        self.signal
            .add(&self.pilot)
            .expect("split fields share one shape")
    }
}

impl ChannelModel {
    pub fn from_transfer(
        labels: Vec<String>,
        pilot_channels: Vec<usize>,
        transfer: CMatrix,
        seed: u64,
    ) -> Result<Self> {
        let m = labels.len();
        if transfer.nrows() != m || transfer.ncols() != m {
            return Err(Error::Parameter(format!(
                "transfer is {}x{} for {m} channels",
                transfer.nrows(),
                transfer.ncols()
            )));
        }
        if pilot_channels.is_empty() || pilot_channels.iter().any(|&p| p >= m) {
            return Err(Error::Parameter("pilot channel indices out of range".into()));
        }
        Ok(Self {
            labels,
            pilot_channels,
            transfer,
            mdl_gains: vec![1.0; m],
            mdl_db: 0.0,
            seed,
            impairments: Impairments::default(),
        })
    }

    pub fn with_impairments(mut self, imp: Impairments) -> Result<Self> {
        let m = self.n_channels();
        for (name, v) in [("skews", &imp.skews), ("port_skews", &imp.port_skews)] {
            if !v.is_empty() && v.len() != m {
                return Err(Error::Parameter(format!(
                    "{name} has {} entries for {m} channels",
                    v.len()
                )));
            }
        }
        if imp.linewidth_hz < 0.0 || !imp.linewidth_hz.is_finite() {
            return Err(Error::Parameter("linewidth must be >= 0".into()));
        }
        self.impairments = imp;
        Ok(self)
    }

    pub fn n_channels(&self) -> usize {
        self.labels.len()
    }

    pub fn is_pilot(&self, idx: usize) -> bool {
        self.pilot_channels.contains(&idx)
    }

    pub fn signal_channels(&self) -> Vec<usize> {
        (0..self.n_channels()).filter(|&i| !self.is_pilot(i)).collect()
    }

    /// H with the mode-dependent loss divided back out.
    pub fn lossless_transfer(&self) -> CMatrix {
        let mut q = self.transfer.clone();
        for (r, g) in self.mdl_gains.iter().enumerate() {
            q.row_mut(r).unscale_mut(*g);
        }
        q
    }

    /// max |(Q Q^H - I)_ij| for the lossless part Q.
    pub fn unitarity_error(&self) -> f64 {
        let q = self.lossless_transfer();
        let g = &q * q.adjoint();
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Intensity leaked from each pilot input into the signal ports of the lossless part.
    pub fn pilot_leakage(&self) -> Vec<f64> {
        let q = self.lossless_transfer();
        let sig = self.signal_channels();
        self.pilot_channels
            .iter()
            .map(|&p| sig.iter().map(|&s| q[(s, p)].norm_sqr()).sum())
            .collect()
    }

    /// 20 log10(sigma_max / sigma_min) of H.
    pub fn realized_mdl_db(&self) -> f64 {
        let sv = self.transfer.clone().singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        20.0 * (max / min).log10()
    }

    /// Maps a transmitter frame (signals + one `PT` channel) onto the M inputs.
    ///
    /// Signals fill the non-pilot inputs in order; the pilot tone enters the
    /// first pilot input and the remaining pilot inputs are dark.
    pub fn launch(&self, tx: &WaveformFrame) -> Result<WaveformFrame> {
        let sig = self.signal_channels();
        let pt_idx = tx
            .index_of(PT_LABEL)
            .ok_or_else(|| Error::Parameter("transmit frame has no PT channel".into()))?;
        let tx_sig: Vec<usize> = (0..tx.n_channels()).filter(|&i| i != pt_idx).collect();
        if tx_sig.len() != sig.len() {
            return Err(Error::Parameter(format!(
                "{} transmitted signal channels for {} channel inputs",
                tx_sig.len(),
                sig.len()
            )));
        }
        let zero = vec![Complex64::new(0.0, 0.0); tx.len()];
        let mut channels = vec![zero; self.n_channels()];
        for (&dst, &src) in sig.iter().zip(&tx_sig) {
            channels[dst] = tx.channel(src).to_vec();
        }
        channels[self.pilot_channels[0]] = tx.channel(pt_idx).to_vec();
        WaveformFrame::new(
            channels,
            tx.sample_rate(),
            tx.samples_per_symbol(),
            self.labels.clone(),
        )
    }

    /// Propagates a launched frame, keeping pilot-origin and signal-origin light apart.
    ///
    /// Order of operations: common laser phase noise (pilot inputs see it
    /// delayed by the differential path delay), input skews, mixing by H,
    /// port skews, receiver-input AWGN (added to the signal-origin part).
    pub fn propagate_split(&self, frame: &WaveformFrame, rng: &mut SimRng) -> Result<ReceivedField> {
        let m = self.n_channels();
        if frame.n_channels() != m {
            return Err(Error::Parameter(format!(
                "frame has {} channels, channel model {m}",
                frame.n_channels()
            )));
        }
        let n = frame.len();
        let imp = &self.impairments;
        let (phase_sig, phase_pt) = self.phase_noise(n, frame.sample_rate(), rng);

        let zero = Complex64::new(0.0, 0.0);
        let mut sig_in = Vec::with_capacity(m);
        let mut pt_in = Vec::with_capacity(m);
        for q in 0..m {
            let x = frame.channel(q);
            let (shaped, dark): (Vec<Complex64>, Vec<Complex64>) = if self.is_pilot(q) {
                let v = apply_phase(x, phase_pt.as_deref());
                (vec![zero; n], v)
            } else {
                let v = apply_phase(x, phase_sig.as_deref());
                (v, vec![zero; n])
            };
            sig_in.push(shaped);
            pt_in.push(dark);
        }
        if !imp.skews.is_empty() {
            for q in 0..m {
                if imp.skews[q] != 0.0 {
                    sig_in[q] = fractional_delay(&sig_in[q], imp.skews[q])?;
                    pt_in[q] = fractional_delay(&pt_in[q], imp.skews[q])?;
                }
            }
        }
        let mut sig_out = self.mix(&sig_in);
        let mut pt_out = self.mix(&pt_in);
        if !imp.port_skews.is_empty() {
            for p in 0..m {
                if imp.port_skews[p] != 0.0 {
                    sig_out[p] = fractional_delay(&sig_out[p], imp.port_skews[p])?;
                    pt_out[p] = fractional_delay(&pt_out[p], imp.port_skews[p])?;
                }
            }
        }
        let noise = dbm_to_power(imp.noise_power_dbm);
        if noise > 0.0 {
            for port in sig_out.iter_mut() {
                for v in port.iter_mut() {
                    *v += rng.complex_gaussian(noise);
                }
            }
        }
        Ok(ReceivedField {
            signal: frame.with_channels(sig_out)?,
            pilot: frame.with_channels(pt_out)?,
        })
    }

    /// Physical received field (sum of both origins).
    pub fn propagate(&self, frame: &WaveformFrame, rng: &mut SimRng) -> Result<WaveformFrame> {
        Ok(self.propagate_split(frame, rng)?.total())
    }

    fn mix(&self, inputs: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let m = inputs.len();
        let n = inputs.first().map_or(0, Vec::len);
        let h = &self.transfer;
        (0..m)
            .map(|p| {
                let row: Vec<(usize, Complex64)> = (0..m)
                    .map(|q| (q, h[(p, q)]))
                    .filter(|(_, c)| c.norm_sqr() > 0.0)
                    .collect();
                (0..n)
                    .map(|t| row.iter().map(|&(q, c)| c * inputs[q][t]).sum())
                    .collect()
            })
            .collect()
    }

    /// Wiener phase for the signal path and its delayed copy for the pilot path.
    fn phase_noise(
        &self,
        n: usize,
        sample_rate: f64,
        rng: &mut SimRng,
    ) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
        let lw = self.impairments.linewidth_hz;
        if lw <= 0.0 {
            return (None, None);
        }
        let delay = self.impairments.differential_path_delay_s * sample_rate;
        let pad = delay.abs().ceil() as usize + 2;
        let sigma = (2.0 * PI * lw / sample_rate).sqrt();
        // phi over sample indices -pad .. n + pad
        let total = n + 2 * pad;
        let mut phi = Vec::with_capacity(total);
        let mut acc = 0.0;
        for _ in 0..total {
            phi.push(acc);
            acc += sigma * rng.gaussian();
        }
        let at = |t: f64| -> f64 {
            let x = t + pad as f64;
            let i = x.floor();
            let f = x - i;
            let i = i as usize;
            phi[i] * (1.0 - f) + phi[(i + 1).min(total - 1)] * f
        };
        let sig: Vec<f64> = (0..n).map(|t| at(t as f64)).collect();
        let pt: Vec<f64> = (0..n).map(|t| at(t as f64 - delay)).collect();
        (Some(sig), Some(pt))
    }
}

fn apply_phase(x: &[Complex64], phase: Option<&[f64]>) -> Vec<Complex64> {
    match phase {
        None => x.to_vec(),
        Some(p) => x
            .iter()
            .zip(p)
            .map(|(v, ph)| v * Complex64::from_polar(1.0, *ph))
            .collect(),
    }
}

/// Haar-distributed random unitary (QR of a complex Gaussian matrix with phase fix).
pub(crate) fn random_unitary(n: usize, rng: &mut SimRng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| rng.complex_gaussian(1.0));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            u[(i, j)] *= ph;
        }
    }
    u
}

#[cfg(test)]
mod tests;
