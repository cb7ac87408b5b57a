//! Self-homodyne coherent receiver.
//!
//! Each signal port is beaten against the pilot-derived local oscillator of
//! the matching polarization: `y = E_port * conj(E_lo)`. Because the channel
//! keeps pilot-origin and signal-origin light apart, the beat splits exactly
//! into four products.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::ReceivedField;
use crate::dsp::{mean_power, Complex64, SimRng, WaveformFrame};
use crate::error::{Error, Result};
use crate::units::{db_serde, dbm_to_power, power_to_db};

/// LO ports whose mean power falls below this are rejected.
pub const LO_STARVED_DBM: f64 = -30.0;

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxConfig {
    /// Received channels used as LO, one per polarization (e.g. `PT-X`, `PT-Y`).
    pub lo_channel_labels: Vec<String>,
    #[serde(with = "db_serde", default = "neg_inf")]
    pub receiver_noise_dbm: f64,
    #[serde(default)]
    pub dc_block: bool,
}

/// The four beat products of one signal port, plus the detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatTerms {
    /// signal at port x conj(pilot at LO)
    pub desired: Vec<Complex64>,
    /// pilot at port x conj(pilot at LO)
    pub dc: Vec<Complex64>,
    /// pilot at port x conj(signal at LO)
    pub first_order: Vec<Complex64>,
    /// signal at port x conj(signal at LO)
    pub second_order: Vec<Complex64>,
    /// Detector output: sum of the above, plus receiver noise, optionally DC-blocked.
    pub total: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeatDecomposition {
    pub labels: Vec<String>,
    /// LO label used for each signal port.
    pub lo_labels: Vec<String>,
    pub terms: Vec<BeatTerms>,
}

/// Power of each interference term relative to the desired term, dB.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermPowers {
    pub channel: String,
    pub desired_dbm: f64,
    pub dc_db: f64,
    pub first_order_db: f64,
    pub second_order_db: f64,
}

fn polarization(label: &str) -> Option<&str> {
    label.rsplit_once('-').map(|(_, p)| p)
}

/// Pairs every non-LO channel with the LO of the same polarization suffix.
fn pair_ports(frame: &WaveformFrame, cfg: &RxConfig) -> Result<Vec<(usize, usize)>> {
    if cfg.lo_channel_labels.is_empty() {
        return Err(Error::Config("no LO channel configured".into()));
    }
    let mut los = Vec::new();
    for l in &cfg.lo_channel_labels {
        let idx = frame
            .index_of(l)
            .ok_or_else(|| Error::Config(format!("LO channel {l:?} not in received frame")))?;
        los.push(idx);
    }
    let mut pairs = Vec::new();
    for (i, label) in frame.labels().iter().enumerate() {
        if los.contains(&i) {
            continue;
        }
        let lo = if los.len() == 1 {
            los[0]
        } else {
            let pol = polarization(label);
            *los.iter()
                .find(|&&lo| polarization(&frame.labels()[lo]) == pol)
                .ok_or_else(|| {
                    Error::Config(format!("no LO with the polarization of {label:?}"))
                })?
        };
        pairs.push((i, lo));
    }
    if pairs.is_empty() {
        return Err(Error::Config("received frame has no signal ports".into()));
    }
    Ok(pairs)
}

fn beat(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).collect()
}

/// Detects every signal port. Returns the detector output frame (signal ports
/// only, in received order) and the exact beat decomposition.
pub fn shcd_detect(
    field: &ReceivedField,
    cfg: &RxConfig,
    rng: &mut SimRng,
) -> Result<(WaveformFrame, BeatDecomposition)> {
    let total_field = field.total();
    let pairs = pair_ports(&total_field, cfg)?;
    for &lo in cfg
        .lo_channel_labels
        .iter()
        .filter_map(|l| total_field.index_of(l))
        .collect::<Vec<_>>()
        .iter()
    {
        let p = power_to_db(mean_power(total_field.channel(lo)));
        if p < LO_STARVED_DBM {
            return Err(Error::LoStarved {
                label: total_field.labels()[lo].clone(),
                power_dbm: p,
            });
        }
    }
    let noise = dbm_to_power(cfg.receiver_noise_dbm);
    let sig = &field.signal;
    let pt = &field.pilot;
    let mut terms = Vec::with_capacity(pairs.len());
    let mut outputs = Vec::with_capacity(pairs.len());
    for &(port, lo) in &pairs {
        let desired = beat(sig.channel(port), pt.channel(lo));
        let dc = beat(pt.channel(port), pt.channel(lo));
        let first_order = beat(pt.channel(port), sig.channel(lo));
        let second_order = beat(sig.channel(port), sig.channel(lo));
        // from the combined field, so the split is checked rather than assumed
        let mut total = beat(total_field.channel(port), total_field.channel(lo));
        if noise > 0.0 {
            total.iter_mut().for_each(|v| *v += rng.complex_gaussian(noise));
        }
        if cfg.dc_block && !total.is_empty() {
            let mean = total.iter().sum::<Complex64>() / total.len() as f64;
            total.iter_mut().for_each(|v| *v -= mean);
        }
        outputs.push(total.clone());
        terms.push(BeatTerms {
            desired,
            dc,
            first_order,
            second_order,
            total,
        });
    }
    let labels: Vec<String> = pairs
        .iter()
        .map(|&(p, _)| total_field.labels()[p].clone())
        .collect();
    let lo_labels = pairs
        .iter()
        .map(|&(_, l)| total_field.labels()[l].clone())
        .collect();
    let frame = WaveformFrame::new(
        outputs,
        total_field.sample_rate(),
        total_field.samples_per_symbol(),
        labels.clone(),
    )?;
    Ok((
        frame,
        BeatDecomposition {
            labels,
            lo_labels,
            terms,
        },
    ))
}

impl BeatDecomposition {
    /// Largest |total - (desired + dc + first + second)| relative to the RMS of total.
    pub fn identity_error(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let rms = mean_power(&t.total).sqrt().max(f64::MIN_POSITIVE);
                (0..t.total.len())
                    .map(|i| {
                        (t.total[i] - (t.desired[i] + t.dc[i] + t.first_order[i] + t.second_order[i]))
                            .norm()
                    })
                    .fold(0.0, f64::max)
                    / rms
            })
            .fold(0.0, f64::max)
    }
}

/// Mean-square power of each term relative to desired, per channel.
pub fn interference_powers(d: &BeatDecomposition) -> Result<Vec<TermPowers>> {
    d.labels
        .iter()
        .zip(&d.terms)
        .map(|(label, t)| {
            let desired = mean_power(&t.desired);
            if desired <= 0.0 {
                return Err(Error::Degenerate(format!("no desired power on {label}")));
            }
            let rel = |x: &[Complex64]| power_to_db(mean_power(x) / desired);
            Ok(TermPowers {
                channel: label.clone(),
                desired_dbm: power_to_db(desired),
                dc_db: rel(&t.dc),
                first_order_db: rel(&t.first_order),
                second_order_db: rel(&t.second_order),
            })
        })
        .collect()
}

/// CSV with columns channel, desired_dbm, dc_db, first_order_db, second_order_db.
pub fn write_term_powers_csv<W: Write>(rows: &[TermPowers], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}
