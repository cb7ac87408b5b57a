//! Scenario configuration, presets and seeded sweep execution.

mod run;

pub use run::{
    detect_trial, equalize_scheme, replay, results_csv, run_scenario, simulate, taps_csv,
    write_outputs, ConstellationDump, DetectedTrial,
    Manifest, ReplayOutcome, ResultRow, SweepResult, TapRow, TrialSeeds, CONSTELLATION_DIR,
    MANIFEST_FILE, MANIFEST_SCHEMA_VERSION, RESULTS_FILE, TAPS_FILE,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{
    build_coupler_channel, build_mmf_channel, mmf_labels, ChannelModel, CouplerSpec, Impairments, MmfSpec,
};
use crate::equalizer::{EqualizerConfig, UpicOrder};
use crate::error::{Error, Result};
use crate::rx::RxConfig;
use crate::txgen::TxConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Coupler,
    Mmf3,
    Custom,
}

impl Preset {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "coupler" => Ok(Preset::Coupler),
            "mmf3" => Ok(Preset::Mmf3),
            "custom" => Ok(Preset::Custom),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected coupler, mmf3 or custom)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelSpec {
    Coupler(CouplerSpec),
    Mmf(MmfSpec),
}

impl ChannelSpec {
    /// Builds the channel; MMF realizations use `seed` in place of the spec's own.
    pub fn build(&self, seed: u64) -> Result<ChannelModel> {
        match self {
            ChannelSpec::Coupler(c) => build_coupler_channel(c),
            ChannelSpec::Mmf(m) => build_mmf_channel(&MmfSpec {
                seed,
                ..m.clone()
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    InputPowerDbm,
    CouplingRatio,
    /// Signal power is set to `pt_power_dbm - value`.
    PsprTxDb,
    IntergroupXtDb,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::InputPowerDbm => "input_power_dbm",
            SweepVariable::CouplingRatio => "coupling_ratio",
            SweepVariable::PsprTxDb => "pspr_tx_db",
            SweepVariable::IntergroupXtDb => "intergroup_xt_db",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Conventional linear MIMO.
    Linear,
    /// UPIC with first-order references.
    Upic1,
    /// UPIC with first- and second-order references.
    Upic12,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Linear => "linear",
            Scheme::Upic1 => "upic1",
            Scheme::Upic12 => "upic12",
        }
    }

    /// Equalizer settings for this scheme derived from the scenario's base config.
    pub fn equalizer_config(&self, base: &EqualizerConfig) -> EqualizerConfig {
        match self {
            Scheme::Linear => EqualizerConfig {
                iterations: 1,
                upic_order: UpicOrder::Off,
                ..base.clone()
            },
            Scheme::Upic1 => EqualizerConfig {
                upic_order: UpicOrder::First,
                ..base.clone()
            },
            Scheme::Upic12 => EqualizerConfig {
                upic_order: UpicOrder::FirstAndSecond,
                ..base.clone()
            },
        }
    }
}

fn all_schemes() -> Vec<Scheme> {
    vec![Scheme::Linear, Scheme::Upic1, Scheme::Upic12]
}
fn d_constellation() -> usize {
    2000
}
fn d_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Written to the `scenario` column.
    pub name: String,
    pub preset: Preset,
    pub tx: TxConfig,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub impairments: Impairments,
    pub rx: RxConfig,
    pub eq: EqualizerConfig,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
    pub sweep: Sweep,
    pub trials_per_point: usize,
    pub seed: u64,
    #[serde(default = "d_output")]
    pub output_dir: PathBuf,
    /// Symbols per constellation dump, taken from trial 0; zero disables dumps.
    #[serde(default = "d_constellation")]
    pub constellation_symbols: usize,
}

/// Outcome of [`validate_config`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Validation {
    pub violations: Vec<String>,
    /// `n_channels x 2 bits x baud`, Gb/s.
    pub aggregate_bit_rate_gbps: f64,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl ScenarioConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Coupler => coupler_preset(),
            Preset::Mmf3 => mmf3_preset(),
            Preset::Custom => ScenarioConfig {
                name: "custom".into(),
                preset: Preset::Custom,
                ..coupler_preset()
            },
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    /// Copy of the configuration with the sweep variable set to `value`.
    pub fn at_point(&self, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match (self.sweep.variable, &mut c.channel) {
            (SweepVariable::InputPowerDbm, _) => c.tx.signal_power_dbm = value,
            (SweepVariable::PsprTxDb, _) => c.tx.signal_power_dbm = c.tx.pt_power_dbm - value,
            (SweepVariable::CouplingRatio, ChannelSpec::Coupler(s)) => s.coupling_ratio_k = value,
            (SweepVariable::IntergroupXtDb, ChannelSpec::Mmf(s)) => s.intergroup_xt_db = value,
            (v, _) => {
                return Err(Error::Config(format!(
                    "sweep variable {} does not apply to this channel",
                    v.name()
                )))
            }
        }
        Ok(c)
    }
}

/// Checks every nested configuration without running anything.
pub fn validate_config(cfg: &ScenarioConfig) -> Validation {
    let mut v = Vec::new();
    v.extend(cfg.tx.violations());
    v.extend(cfg.eq.violations());
    if cfg.sweep.values.is_empty() {
        v.push("sweep.values must not be empty".into());
    }
    if cfg.sweep.values.iter().any(|x| !x.is_finite()) {
        v.push("sweep.values must be finite".into());
    }
    if cfg.trials_per_point == 0 {
        v.push("trials_per_point must be at least 1".into());
    }
    if cfg.schemes.is_empty() {
        v.push("schemes must not be empty".into());
    }
    if cfg.schemes.iter().any(|s| *s != Scheme::Linear) && cfg.eq.iterations < 2 {
        v.push("UPIC schemes need eq.iterations >= 2".into());
    }
    if cfg.eq.n_outputs != cfg.tx.n_signal_channels {
        v.push(format!(
            "eq.n_outputs {} differs from tx.n_signal_channels {}",
            cfg.eq.n_outputs, cfg.tx.n_signal_channels
        ));
    }
    if cfg.eq.sps_in != cfg.tx.samples_per_symbol {
        v.push(format!(
            "eq.sps_in {} differs from tx.samples_per_symbol {}",
            cfg.eq.sps_in, cfg.tx.samples_per_symbol
        ));
    }
    if cfg.eq.training_length > cfg.tx.training_length {
        v.push(format!(
            "eq.training_length {} exceeds tx.training_length {}",
            cfg.eq.training_length, cfg.tx.training_length
        ));
    }
    if cfg.eq.training_length + cfg.eq.tail_guard >= cfg.tx.n_symbols {
        v.push("no payload symbols remain after training and tail guard".into());
    }
    let mut points = vec![cfg.clone()];
    for &x in &cfg.sweep.values {
        match cfg.at_point(x) {
            Ok(p) => points.push(p),
            Err(e) => {
                v.push(e.to_string());
                break;
            }
        }
    }
    for p in &points {
        match p.channel.build(cfg.seed) {
            Ok(ch) => {
                let n_sig = ch.signal_channels().len();
                if n_sig != cfg.tx.n_signal_channels {
                    v.push(format!(
                        "channel has {n_sig} signal channels, tx has {}",
                        cfg.tx.n_signal_channels
                    ));
                }
                if cfg.tx.signal_labels.as_ref().is_some_and(|l| {
                    l.iter()
                        .zip(&ch.labels)
                        .any(|(a, b)| a != b)
                }) {
                    v.push("tx.signal_labels differ from the channel's signal labels".into());
                }
                for lo in &cfg.rx.lo_channel_labels {
                    if !ch.labels.contains(lo) {
                        v.push(format!("rx LO {lo:?} is not a channel label"));
                    }
                }
                if let Err(e) = ch.clone().with_impairments(cfg.impairments.clone()) {
                    v.push(e.to_string());
                }
            }
            Err(e) => v.push(format!("channel: {e}")),
        }
    }
    v.dedup();
    Validation {
        violations: v,
        aggregate_bit_rate_gbps: cfg.tx.aggregate_bit_rate() / 1e9,
    }
}

fn coupler_preset() -> ScenarioConfig {
    ScenarioConfig {
        name: "coupler".into(),
        preset: Preset::Coupler,
        tx: TxConfig {
            symbol_rate: 10e9,
            n_signal_channels: 2,
            samples_per_symbol: 2,
            n_symbols: 43_008,
            roll_off: 0.1,
            rrc_span_symbols: 64,
            signal_power_dbm: -8.0,
            pt_power_dbm: 9.0,
            training_length: 10_000,
            seed: 0,
            signal_labels: Some(vec!["SIG-X".into(), "SIG-Y".into()]),
        },
        channel: ChannelSpec::Coupler(CouplerSpec::new(0.05)),
        impairments: Impairments {
            linewidth_hz: 100e3,
            ..Impairments::default()
        },
        rx: RxConfig {
            lo_channel_labels: vec!["PT-X".into(), "PT-Y".into()],
            receiver_noise_dbm: COUPLER_RECEIVER_NOISE_DBM,
            dc_block: false,
        },
        eq: EqualizerConfig::new(2),
        schemes: all_schemes(),
        sweep: Sweep {
            variable: SweepVariable::InputPowerDbm,
            values: vec![-14.0, -12.0, -10.0, -8.0, -6.0, -4.0, -2.0],
        },
        trials_per_point: 4,
        seed: 1,
        output_dir: PathBuf::from("out/coupler"),
        constellation_symbols: d_constellation(),
    }
}

fn mmf3_preset() -> ScenarioConfig {
    ScenarioConfig {
        name: "mmf3".into(),
        preset: Preset::Mmf3,
        tx: TxConfig {
            symbol_rate: 30e9,
            n_signal_channels: 4,
            samples_per_symbol: 2,
            n_symbols: 43_008,
            roll_off: 0.1,
            rrc_span_symbols: 64,
            signal_power_dbm: -1.0,
            pt_power_dbm: 10.0,
            training_length: 10_000,
            seed: 0,
            signal_labels: Some(mmf_labels(3)[..4].to_vec()),
        },
        channel: ChannelSpec::Mmf(MmfSpec::new(-7.0, 5.0, 0)),
        impairments: Impairments {
            linewidth_hz: 100e3,
            ..Impairments::default()
        },
        rx: RxConfig {
            lo_channel_labels: vec!["LP01-X".into(), "LP01-Y".into()],
            receiver_noise_dbm: MMF3_RECEIVER_NOISE_DBM,
            dc_block: false,
        },
        eq: EqualizerConfig::new(4),
        schemes: all_schemes(),
        sweep: Sweep {
            variable: SweepVariable::PsprTxDb,
            values: vec![3.0, 5.0, 7.0, 9.0, 11.0, 13.0],
        },
        trials_per_point: 4,
        seed: 1,
        output_dir: PathBuf::from("out/mmf3"),
        constellation_symbols: d_constellation(),
    }
}

const COUPLER_RECEIVER_NOISE_DBM: f64 = -12.0;
const MMF3_RECEIVER_NOISE_DBM: f64 = -12.0;

#[cfg(test)]
mod tests;
