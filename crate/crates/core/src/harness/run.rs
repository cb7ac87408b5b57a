use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{validate_config, ScenarioConfig, Scheme};
use crate::dsp::{split_seed, Complex64, SimRng, WaveformFrame, RNG_ALGORITHM};
use crate::equalizer::{linear_mimo_equalize, upic_mimo_equalize, EqualizedOutput};
use crate::error::{Error, Result};
use crate::metrics::{constellation_dump, constellation_file_name, evm_db};
use crate::rx::{shcd_detect, BeatDecomposition};
use crate::txgen::{generate_tx, TxRecord};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
const TOOL: &str = env!("CARGO_PKG_NAME");
const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const RESULTS_FILE: &str = "results.csv";
pub const TAPS_FILE: &str = "taps.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONSTELLATION_DIR: &str = "constellations";

/// One line of results.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub sweep_variable: String,
    pub sweep_value: f64,
    pub trial: usize,
    pub scheme: Scheme,
    /// Channel label, or `all` for the aggregate over channels.
    pub channel: String,
    pub ber: f64,
    pub ci95: f64,
    pub evm_db: f64,
    pub fec_pass: bool,
    /// `ok`, or `error: <message>`.
    pub status: String,
    /// Raw counts behind `ber`; kept in memory for pooling, not written to the CSV.
    pub bit_errors: u64,
    pub bits_counted: u64,
}

/// One line of taps.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct TapRow {
    pub sweep_value: f64,
    pub trial: usize,
    pub scheme: Scheme,
    pub output_ch: String,
    pub branch_kind: String,
    pub branch_detail: String,
    pub norm_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub trial: usize,
    pub tx_seed: u64,
    pub channel_seed: u64,
    pub noise_seed: u64,
}

impl TrialSeeds {
    /// Seeds depend on the base seed and trial only, so every sweep point and
    /// scheme of one trial sees the same bits, channel and noise draws.
    pub fn derive(base: u64, trial: usize) -> Self {
        let t = 3 * trial as u64;
        Self {
            trial,
            tx_seed: split_seed(base, t),
            channel_seed: split_seed(base, t + 1),
            noise_seed: split_seed(base, t + 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub rng_algorithm: String,
    pub config: ScenarioConfig,
    pub seeds: Vec<TrialSeeds>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "manifest schema {} not supported (expected {MANIFEST_SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        Ok(m)
    }
}

/// Equalized symbols kept for a constellation file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationDump {
    /// Path relative to the output directory.
    pub path: PathBuf,
    pub symbols: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<ResultRow>,
    pub taps: Vec<TapRow>,
    pub constellations: Vec<ConstellationDump>,
    pub seeds: Vec<TrialSeeds>,
    /// Number of (point, trial, scheme) runs that ended in an error.
    pub failures: usize,
}

impl SweepResult {
    /// The aggregate (`channel == "all"`) rows only.
    pub fn aggregate_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.channel == "all")
    }
}

struct TaskOutput {
    rows: Vec<ResultRow>,
    taps: Vec<TapRow>,
    constellations: Vec<ConstellationDump>,
    failures: usize,
}

/// Runs one scheme's equalizer on a detected trial.
pub fn equalize_scheme(
    scheme: Scheme,
    cfg: &ScenarioConfig,
    rx: &WaveformFrame,
    tx: &TxRecord,
) -> Result<EqualizedOutput> {
    let eq = scheme.equalizer_config(&cfg.eq);
    match scheme {
        Scheme::Linear => linear_mimo_equalize(rx, &eq, tx),
        _ => upic_mimo_equalize(rx, &eq, tx),
    }
}

/// Transmitter record, detector output and beat decomposition of one trial.
#[derive(Debug, Clone)]
pub struct DetectedTrial {
    pub tx: TxRecord,
    pub rx: WaveformFrame,
    pub beats: BeatDecomposition,
}

/// Transmit, propagate and detect one (sweep value, trial) exactly as a sweep does.
pub fn detect_trial(cfg: &ScenarioConfig, value: f64, seeds: TrialSeeds) -> Result<DetectedTrial> {
    let mut pc = cfg.at_point(value)?;
    pc.tx.seed = seeds.tx_seed;
    let tx = generate_tx(&pc.tx)?;
    let ch = pc
        .channel
        .build(seeds.channel_seed)?
        .with_impairments(pc.impairments.clone())?;
    let field = ch.propagate_split(&ch.launch(&tx.frame)?, &mut SimRng::stream(seeds.noise_seed, 0))?;
    let (rx, beats) = shcd_detect(&field, &pc.rx, &mut SimRng::stream(seeds.noise_seed, 1))?;
    Ok(DetectedTrial { tx, rx, beats })
}

fn point_dir(idx: usize, variable: &str, value: f64) -> String {
    format!("p{idx:02}_{variable}_{value}")
}

fn run_task(cfg: &ScenarioConfig, idx: usize, value: f64, seeds: TrialSeeds) -> TaskOutput {
    let variable = cfg.sweep.variable.name();
    let base_row = |scheme: Scheme| ResultRow {
        scenario: cfg.name.clone(),
        sweep_variable: variable.to_string(),
        sweep_value: value,
        trial: seeds.trial,
        scheme,
        channel: "all".into(),
        ber: f64::NAN,
        ci95: f64::NAN,
        evm_db: f64::NAN,
        fec_pass: false,
        status: "ok".into(),
        bit_errors: 0,
        bits_counted: 0,
    };
    let fail = |e: &Error| -> TaskOutput {
        TaskOutput {
            rows: cfg
                .schemes
                .iter()
                .map(|&s| ResultRow {
                    status: format!("error: {e}"),
                    ..base_row(s)
                })
                .collect(),
            taps: Vec::new(),
            constellations: Vec::new(),
            failures: cfg.schemes.len(),
        }
    };
    let (tx, rx) = match detect_trial(cfg, value, seeds) {
        Ok(t) => (t.tx, t.rx),
        Err(e) => return fail(&e),
    };
    let mut out = TaskOutput {
        rows: Vec::new(),
        taps: Vec::new(),
        constellations: Vec::new(),
        failures: 0,
    };
    for &scheme in &cfg.schemes {
        match equalize_scheme(scheme, cfg, &rx, &tx).and_then(|eq| {
            let rows = scheme_rows(&eq, &tx, base_row(scheme))?;
            Ok((eq, rows))
        }) {
            Ok((eq, rows)) => {
                out.rows.extend(rows);
                out.taps.extend(eq.tap_report.iter().map(|t| TapRow {
                    sweep_value: value,
                    trial: seeds.trial,
                    scheme,
                    output_ch: t.output_ch.clone(),
                    branch_kind: t.branch_kind.to_string(),
                    branch_detail: t.branch_detail.clone(),
                    norm_db: t.norm_db,
                }));
                if seeds.trial == 0 && cfg.constellation_symbols > 0 {
                    let dir = PathBuf::from(CONSTELLATION_DIR).join(point_dir(idx, variable, value));
                    let (start, end) = eq.counted;
                    let stop = end.min(start + cfg.constellation_symbols);
                    for (it, res) in eq.iterations.iter().enumerate() {
                        for (ch, label) in eq.labels.iter().enumerate() {
                            out.constellations.push(ConstellationDump {
                                path: dir.join(constellation_file_name(scheme.name(), label, it + 1)),
                                symbols: res.symbols[ch][start..stop].to_vec(),
                            });
                        }
                    }
                }
            }
            Err(e) => {
                out.failures += 1;
                out.rows.push(ResultRow {
                    status: format!("error: {e}"),
                    ..base_row(scheme)
                });
            }
        }
    }
    out
}

fn scheme_rows(eq: &EqualizedOutput, tx: &TxRecord, base: ResultRow) -> Result<Vec<ResultRow>> {
    let ber = eq.final_ber();
    let (start, end) = eq.counted;
    let mut rows = Vec::with_capacity(eq.labels.len() + 1);
    for (ch, label) in eq.labels.iter().enumerate() {
        let c = &ber.per_channel[ch];
        rows.push(ResultRow {
            channel: label.clone(),
            ber: c.ber,
            ci95: c.ci95_halfwidth,
            evm_db: evm_db(&eq.symbols[ch][start..end], &tx.symbols[ch][start..end])?,
            fec_pass: c.ber <= crate::metrics::FEC_THRESHOLD,
            bit_errors: c.bit_errors,
            bits_counted: c.bits_counted,
            ..base.clone()
        });
    }
    rows.push(ResultRow {
        ber: ber.ber,
        ci95: ber.ci95_halfwidth,
        evm_db: eq.iterations.last().map_or(f64::NAN, |i| i.evm_db),
        fec_pass: ber.fec_pass,
        bit_errors: ber.bit_errors,
        bits_counted: ber.bits_counted,
        ..base
    });
    Ok(rows)
}

/// Runs every (sweep point, trial) without touching the filesystem.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SweepResult> {
    let v = validate_config(cfg);
    if !v.is_ok() {
        return Err(Error::Config(v.violations.join("; ")));
    }
    let seeds: Vec<TrialSeeds> = (0..cfg.trials_per_point)
        .map(|t| TrialSeeds::derive(cfg.seed, t))
        .collect();
    let tasks: Vec<(usize, f64, TrialSeeds)> = cfg
        .sweep
        .values
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| seeds.iter().map(move |&s| (i, v, s)))
        .collect();
    let outputs: Vec<TaskOutput> = tasks
        .par_iter()
        .map(|&(i, v, s)| run_task(cfg, i, v, s))
        .collect();
    let mut result = SweepResult {
        rows: Vec::new(),
        taps: Vec::new(),
        constellations: Vec::new(),
        seeds,
        failures: 0,
    };
    for o in outputs {
        result.rows.extend(o.rows);
        result.taps.extend(o.taps);
        result.constellations.extend(o.constellations);
        result.failures += o.failures;
    }
    result.rows.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then(a.trial.cmp(&b.trial))
            .then(a.scheme.cmp(&b.scheme))
    });
    result.taps.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then(a.trial.cmp(&b.trial))
            .then(a.scheme.cmp(&b.scheme))
    });
    Ok(result)
}

/// [`simulate`] followed by [`write_outputs`] into `cfg.output_dir`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SweepResult> {
    let result = simulate(cfg)?;
    write_outputs(&result, cfg, &cfg.output_dir)?;
    Ok(result)
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Renders results.csv.
pub fn results_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario",
        "sweep_variable",
        "sweep_value",
        "trial",
        "scheme",
        "channel",
        "ber",
        "ci95",
        "evm_db",
        "fec_pass",
        "status",
    ])?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.sweep_variable.clone(),
            fmt_f64(r.sweep_value),
            r.trial.to_string(),
            r.scheme.name().to_string(),
            r.channel.clone(),
            fmt_f64(r.ber),
            fmt_f64(r.ci95),
            fmt_f64(r.evm_db),
            r.fec_pass.to_string(),
            r.status.clone(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Serde(e.to_string()))
}

/// Renders taps.csv.
pub fn taps_csv(rows: &[TapRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "sweep_value",
        "trial",
        "scheme",
        "output_ch",
        "branch_kind",
        "branch_detail",
        "norm_db",
    ])?;
    for r in rows {
        w.write_record([
            fmt_f64(r.sweep_value),
            r.trial.to_string(),
            r.scheme.name().to_string(),
            r.output_ch.clone(),
            r.branch_kind.clone(),
            r.branch_detail.clone(),
            fmt_f64(r.norm_db),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Serde(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes results.csv, taps.csv, constellation dumps and manifest.json under `dir`.
pub fn write_outputs(result: &SweepResult, cfg: &ScenarioConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(RESULTS_FILE), &results_csv(&result.rows)?)?;
    write_file(&dir.join(TAPS_FILE), &taps_csv(&result.taps)?)?;
    let mut files = vec![RESULTS_FILE.to_string(), TAPS_FILE.to_string()];
    for c in &result.constellations {
        let path = dir.join(&c.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        constellation_dump(&c.symbols, &path)?;
        files.push(c.path.to_string_lossy().replace('\\', "/"));
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        tool: TOOL.into(),
        tool_version: TOOL_VERSION.into(),
        rng_algorithm: RNG_ALGORITHM.into(),
        config: cfg.clone(),
        seeds: result.seeds.clone(),
        files,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    write_file(&dir.join(MANIFEST_FILE), json.as_bytes())
}

/// Outcome of [`replay`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub result: SweepResult,
    pub output_dir: PathBuf,
    /// Whether the regenerated results.csv equals the one beside the manifest,
    /// if that file exists.
    pub identical: Option<bool>,
}

/// Re-runs the configuration stored in a manifest into `out` (default:
/// `replay/` beside the manifest) and compares results.csv byte for byte.
pub fn replay(manifest_path: &Path, out: Option<&Path>) -> Result<ReplayOutcome> {
    let m = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let output_dir = out.map_or_else(|| base.join("replay"), Path::to_path_buf);
    let mut cfg = m.config.clone();
    cfg.output_dir = output_dir.clone();
    let result = simulate(&cfg)?;
    if result.seeds != m.seeds {
        return Err(Error::Config("manifest seeds do not match the derived seeds".into()));
    }
    write_outputs(&result, &m.config, &output_dir)?;
    let original = base.join(RESULTS_FILE);
    let identical = if original.exists() {
        let a = fs::read(&original).map_err(|e| Error::io(&original, e))?;
        let b = fs::read(output_dir.join(RESULTS_FILE)).map_err(|e| Error::io(&output_dir, e))?;
        Some(a == b)
    } else {
        None
    };
    Ok(ReplayOutcome {
        result,
        output_dir,
        identical,
    })
}
