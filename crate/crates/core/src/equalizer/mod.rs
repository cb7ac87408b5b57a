//! Frame synchronization, the linear MIMO baseline and the UPIC-assisted
//! equalizer.
//!
//! Every branch, received or reference, goes through the same front end: the
//! fixed RRC matched filter followed by normalization to unit mean power. The
//! butterfly is a fractionally spaced FIR per (output, branch) pair, adapted by
//! LMS on a known training prefix and decision-directed afterwards.
//! Interference references enter as extra input branches so their cancelling
//! weights are learned jointly with the butterfly.

mod lms;
mod references;
mod sync;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dsp::{convolve_same, mean_power, Complex64, RrcFilter, WaveformFrame};
use crate::error::{Error, Result};
use crate::metrics::{count_ber_channels, evm_db, BerResult};
use crate::txgen::{qpsk_demap, qpsk_slice, shape_symbols, TxRecord};

pub use references::{build_upic_references, ReferenceSet};
pub use sync::{frame_sync, SyncResult, SYNC_PSL_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    /// Transmitted symbols stand in for correctly decoded feedback.
    Genie,
    /// Hard QPSK decisions of the previous iteration.
    HardDecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpicOrder {
    Off,
    First,
    FirstAndSecond,
}

fn d_taps() -> usize {
    31
}
fn d_ref_taps() -> usize {
    7
}
fn d_sps() -> usize {
    2
}
fn d_mu_train() -> f64 {
    1e-3
}
fn d_mu_dd() -> f64 {
    1e-4
}
fn d_training() -> usize {
    10_000
}
fn d_iterations() -> usize {
    2
}
fn d_feedback() -> FeedbackMode {
    FeedbackMode::Genie
}
fn d_order() -> UpicOrder {
    UpicOrder::FirstAndSecond
}
fn d_sync_lag() -> usize {
    256
}
fn d_tail() -> usize {
    32
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualizerConfig {
    pub n_outputs: usize,
    #[serde(default = "d_taps")]
    pub taps_per_branch: usize,
    /// Taps on each first- and second-order reference branch. The DC branch has one.
    #[serde(default = "d_ref_taps")]
    pub ref_taps_per_branch: usize,
    #[serde(default = "d_sps")]
    pub sps_in: usize,
    #[serde(default = "d_mu_train")]
    pub mu_train: f64,
    #[serde(default = "d_mu_dd")]
    pub mu_dd: f64,
    #[serde(default = "d_training")]
    pub training_length: usize,
    #[serde(default = "d_iterations")]
    pub iterations: usize,
    #[serde(default = "d_feedback")]
    pub feedback_mode: FeedbackMode,
    #[serde(default = "d_order")]
    pub upic_order: UpicOrder,
    /// Second-order pairs `(a, b)` for `r_a conj(r_b)`. All ordered pairs when absent.
    #[serde(default)]
    pub pair_set: Option<Vec<(usize, usize)>>,
    /// Frame-sync search range, samples either side of zero.
    #[serde(default = "d_sync_lag")]
    pub max_sync_lag: usize,
    /// Symbols at the end of the frame left out of BER counting.
    #[serde(default = "d_tail")]
    pub tail_guard: usize,
    #[serde(default = "d_true")]
    pub matched_filter: bool,
}

impl EqualizerConfig {
    pub fn new(n_outputs: usize) -> Self {
        Self {
            n_outputs,
            taps_per_branch: d_taps(),
            ref_taps_per_branch: d_ref_taps(),
            sps_in: d_sps(),
            mu_train: d_mu_train(),
            mu_dd: d_mu_dd(),
            training_length: d_training(),
            iterations: d_iterations(),
            feedback_mode: d_feedback(),
            upic_order: d_order(),
            pair_set: None,
            max_sync_lag: d_sync_lag(),
            tail_guard: d_tail(),
            matched_filter: true,
        }
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        match &self.pair_set {
            Some(p) => p.clone(),
            None => (0..self.n_outputs)
                .flat_map(|a| (0..self.n_outputs).map(move |b| (a, b)))
                .collect(),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_outputs == 0 {
            v.push("eq.n_outputs must be at least 1".into());
        }
        if self.taps_per_branch.is_multiple_of(2) {
            v.push(format!("eq.taps_per_branch must be odd, got {}", self.taps_per_branch));
        }
        if self.ref_taps_per_branch.is_multiple_of(2) {
            v.push(format!(
                "eq.ref_taps_per_branch must be odd, got {}",
                self.ref_taps_per_branch
            ));
        }
        if self.sps_in == 0 {
            v.push("eq.sps_in must be at least 1".into());
        }
        for (name, mu) in [("mu_train", self.mu_train), ("mu_dd", self.mu_dd)] {
            if !(mu > 0.0 && mu < 1.0) {
                v.push(format!("eq.{name} must lie in (0, 1), got {mu}"));
            }
        }
        if self.training_length < 256 {
            v.push(format!(
                "eq.training_length must be at least 256 symbols, got {}",
                self.training_length
            ));
        }
        if self.iterations == 0 {
            v.push("eq.iterations must be at least 1".into());
        }
        if let Some(p) = &self.pair_set {
            if p.iter().any(|&(a, b)| a >= self.n_outputs || b >= self.n_outputs) {
                v.push("eq.pair_set references a channel beyond n_outputs".into());
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
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BranchKind {
    Received { channel: usize },
    FirstOrder { channel: usize },
    SecondOrder { a: usize, b: usize },
    Dc,
}

impl BranchKind {
    pub fn name(&self) -> &'static str {
        match self {
            BranchKind::Received { .. } => "received",
            BranchKind::FirstOrder { .. } => "first_order",
            BranchKind::SecondOrder { .. } => "second_order",
            BranchKind::Dc => "dc",
        }
    }

    pub fn is_reference(&self) -> bool {
        !matches!(self, BranchKind::Received { .. })
    }

    pub fn detail(&self, labels: &[String]) -> String {
        let l = |i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
        match *self {
            BranchKind::Received { channel } => l(channel),
            BranchKind::FirstOrder { channel } => format!("conj({})", l(channel)),
            BranchKind::SecondOrder { a, b } => format!("{}*conj({})", l(a), l(b)),
            BranchKind::Dc => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDescriptor {
    pub kind: BranchKind,
    /// Delay applied to the branch relative to the frame offset, samples.
    /// For second-order branches this is the delay of the conjugated factor.
    pub skew_applied: f64,
    pub taps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerState {
    /// `[output][branch][tap]`
    pub taps: Vec<Vec<Vec<Complex64>>>,
    pub branch_catalog: Vec<BranchDescriptor>,
    /// Per-symbol squared error of the final iteration, averaged over outputs.
    pub mse_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TapNorm {
    pub output_ch: String,
    pub branch_kind: &'static str,
    pub branch_detail: String,
    /// `20 log10` of the branch's tap-vector L2 norm.
    pub norm_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationResult {
    pub ber: BerResult,
    /// Mean over channels of the per-channel EVM (linear average, reported in dB).
    pub evm_db: f64,
    /// Mean squared error over the last 1000 training symbols.
    pub training_mse: f64,
    /// Equalized symbols `[channel][symbol]`, all symbols of the frame.
    pub symbols: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizedOutput {
    pub labels: Vec<String>,
    /// Final-iteration equalized symbols.
    pub symbols: Vec<Vec<Complex64>>,
    /// Final-iteration hard decisions.
    pub decisions: Vec<Vec<u8>>,
    pub iterations: Vec<IterationResult>,
    pub tap_report: Vec<TapNorm>,
    pub state: EqualizerState,
    pub sync: SyncResult,
    /// First symbol and one past the last symbol counted for BER.
    pub counted: (usize, usize),
}

impl EqualizedOutput {
    /// `[iteration][channel]`
    pub fn per_iteration_ber(&self) -> Vec<Vec<f64>> {
        self.iterations
            .iter()
            .map(|it| it.ber.per_channel.iter().map(|c| c.ber).collect())
            .collect()
    }

    pub fn final_ber(&self) -> &BerResult {
        &self.iterations.last().expect("at least one iteration").ber
    }

    /// Branch norms of output `o` relative to its strongest received branch, dB.
    pub fn relative_norms(&self, o: usize) -> Vec<(BranchKind, f64)> {
        let norms: Vec<f64> = self.state.taps[o].iter().map(|t| tap_norm_db(t)).collect();
        let main = self
            .state
            .branch_catalog
            .iter()
            .zip(&norms)
            .filter(|(d, _)| !d.kind.is_reference())
            .map(|(_, n)| *n)
            .fold(f64::NEG_INFINITY, f64::max);
        self.state
            .branch_catalog
            .iter()
            .zip(&norms)
            .map(|(d, n)| (d.kind, n - main))
            .collect()
    }
}

fn tap_norm_db(t: &[Complex64]) -> f64 {
    let e: f64 = t.iter().map(|v| v.norm_sqr()).sum();
    10.0 * e.log10()
}

/// Matched filter (optional) then scaling to unit mean power.
fn front_end(x: &[Complex64], shaping: &RrcFilter, matched: bool) -> Result<Vec<Complex64>> {
    let mut y = if matched {
        convolve_same(x, &shaping.taps)?
    } else {
        x.to_vec()
    };
    let p = mean_power(&y);
    if p > 0.0 {
        let g = 1.0 / p.sqrt();
        y.iter_mut().for_each(|v| *v *= g);
    }
    Ok(y)
}

struct Prepared {
    received: Vec<Vec<Complex64>>,
    sync: SyncResult,
    n_symbols: usize,
    training: Vec<Vec<Complex64>>,
    counted: (usize, usize),
}

fn prepare(rx: &WaveformFrame, cfg: &EqualizerConfig, tx: &TxRecord) -> Result<Prepared> {
    cfg.validate()?;
    if rx.n_channels() != cfg.n_outputs {
        return Err(Error::Parameter(format!(
            "{} received branches for {} outputs",
            rx.n_channels(),
            cfg.n_outputs
        )));
    }
    if tx.n_signal_channels() != cfg.n_outputs {
        return Err(Error::Parameter(format!(
            "{} transmitted channels for {} outputs",
            tx.n_signal_channels(),
            cfg.n_outputs
        )));
    }
    let sps = rx.samples_per_symbol();
    if sps != cfg.sps_in || tx.shaping.samples_per_symbol != sps {
        return Err(Error::Parameter(format!(
            "sample rates disagree: frame {sps}, eq {}, shaping {} samples/symbol",
            cfg.sps_in, tx.shaping.samples_per_symbol
        )));
    }
    if cfg.training_length > tx.training_length {
        return Err(Error::Parameter(format!(
            "equalizer trains on {} symbols but only {} are known",
            cfg.training_length, tx.training_length
        )));
    }
    let n_symbols = rx.len() / sps;
    if n_symbols < cfg.training_length + cfg.tail_guard + 1 {
        return Err(Error::Parameter(format!(
            "{n_symbols} symbols leave no payload after training and tail guard"
        )));
    }
    let received = rx
        .channels()
        .iter()
        .map(|c| front_end(c, &tx.shaping, cfg.matched_filter))
        .collect::<Result<Vec<_>>>()?;
    let training: Vec<Vec<Complex64>> = tx
        .symbols
        .iter()
        .map(|s| s[..cfg.training_length].to_vec())
        .collect();
    let templates = training
        .iter()
        .map(|s| shape_symbols(s, &tx.shaping))
        .collect::<Result<Vec<_>>>()?;
    let front = WaveformFrame::new(
        received.clone(),
        rx.sample_rate(),
        sps,
        rx.labels().to_vec(),
    )?;
    let sync = frame_sync(&front, &templates, cfg.max_sync_lag)?;
    Ok(Prepared {
        received,
        sync,
        n_symbols,
        training,
        counted: (cfg.training_length, n_symbols - cfg.tail_guard),
    })
}

fn score(
    outputs: &[Vec<Complex64>],
    tx: &TxRecord,
    counted: (usize, usize),
) -> Result<(BerResult, f64, Vec<Vec<u8>>)> {
    let decisions: Vec<Vec<u8>> = outputs.iter().map(|y| qpsk_demap(y)).collect();
    let n_bits = 2 * outputs[0].len();
    let tx_bits: Vec<&[u8]> = tx.bits.iter().map(|b| &b[..n_bits]).collect();
    let ber = count_ber_channels(&tx_bits, &decisions, 2 * counted.0, n_bits - 2 * counted.1)?;
    let mut evm_lin = 0.0;
    for (y, s) in outputs.iter().zip(&tx.symbols) {
        let e = evm_db(&y[counted.0..counted.1], &s[counted.0..counted.1])?;
        evm_lin += 10f64.powf(e / 10.0);
    }
    let evm = 10.0 * (evm_lin / outputs.len() as f64).log10();
    Ok((ber, evm, decisions))
}

fn unflatten(taps: &[Vec<Complex64>], catalog: &[BranchDescriptor]) -> Vec<Vec<Vec<Complex64>>> {
    taps.iter()
        .map(|w| {
            let mut pos = 0;
            catalog
                .iter()
                .map(|d| {
                    let t = w[pos..pos + d.taps].to_vec();
                    pos += d.taps;
                    t
                })
                .collect()
        })
        .collect()
}

fn tap_report(
    taps: &[Vec<Vec<Complex64>>],
    catalog: &[BranchDescriptor],
    labels: &[String],
) -> Vec<TapNorm> {
    let mut out = Vec::new();
    for (o, per_branch) in taps.iter().enumerate() {
        for (d, t) in catalog.iter().zip(per_branch) {
            out.push(TapNorm {
                output_ch: labels[o].clone(),
                branch_kind: d.kind.name(),
                branch_detail: d.kind.detail(labels),
                norm_db: tap_norm_db(t),
            });
        }
    }
    out
}

/// CSV with columns output_ch, branch_kind, branch_detail, norm_db.
pub fn write_tap_report_csv<W: Write>(rows: &[TapNorm], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))?;
    Ok(())
}

struct Engine<'a> {
    cfg: &'a EqualizerConfig,
    tx: &'a TxRecord,
    prep: Prepared,
    labels: Vec<String>,
    catalog: Vec<BranchDescriptor>,
    branches: Vec<Vec<Complex64>>,
    taps: Vec<Vec<Complex64>>,
    iterations: Vec<IterationResult>,
    mse_history: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn new(rx: &WaveformFrame, cfg: &'a EqualizerConfig, tx: &'a TxRecord) -> Result<Self> {
        let prep = prepare(rx, cfg, tx)?;
        let n = cfg.n_outputs;
        let catalog: Vec<BranchDescriptor> = (0..n)
            .map(|ch| BranchDescriptor {
                kind: BranchKind::Received { channel: ch },
                skew_applied: 0.0,
                taps: cfg.taps_per_branch,
            })
            .collect();
        let total = n * cfg.taps_per_branch;
        let c = cfg.taps_per_branch / 2;
        let taps = (0..n)
            .map(|o| {
                let mut w = vec![Complex64::new(0.0, 0.0); total];
                w[o * cfg.taps_per_branch + c] = Complex64::new(1.0, 0.0);
                w
            })
            .collect();
        Ok(Self {
            cfg,
            tx,
            branches: prep.received.clone(),
            prep,
            labels: rx.labels().to_vec(),
            catalog,
            taps,
            iterations: Vec::new(),
            mse_history: Vec::new(),
        })
    }

    fn iterate(&mut self) -> Result<()> {
        let tap_counts: Vec<usize> = self.catalog.iter().map(|d| d.taps).collect();
        let input = lms::LmsInput {
            branches: &self.branches,
            tap_counts: &tap_counts,
            sps: self.cfg.sps_in,
            offset: self.prep.sync.offset,
            n_symbols: self.prep.n_symbols,
            training: &self.prep.training,
            training_length: self.cfg.training_length,
            mu_train: self.cfg.mu_train,
            mu_dd: self.cfg.mu_dd,
        };
        let run = lms::run_lms(&input, &mut self.taps)?;
        let (ber, evm, _) = score(&run.outputs, self.tx, self.prep.counted)?;
        self.mse_history = run.mse;
        self.iterations.push(IterationResult {
            ber,
            evm_db: evm,
            training_mse: run.training_mse,
            symbols: run.outputs,
        });
        Ok(())
    }

    fn feedback(&self) -> Vec<Vec<Complex64>> {
        let n = self.prep.n_symbols;
        match self.cfg.feedback_mode {
            FeedbackMode::Genie => self.tx.symbols.iter().map(|s| s[..n].to_vec()).collect(),
            FeedbackMode::HardDecision => {
                let last = &self.iterations.last().expect("previous iteration").symbols;
                last.iter()
                    .zip(&self.prep.training)
                    .map(|(y, t)| {
                        let mut f: Vec<Complex64> = y.iter().map(|v| qpsk_slice(*v)).collect();
                        f[..t.len()].copy_from_slice(t);
                        f
                    })
                    .collect()
            }
        }
    }

    /// Replaces the reference branches with fresh ones from the latest feedback.
    fn rebuild_references(&mut self) -> Result<()> {
        let n = self.cfg.n_outputs;
        let refs = build_upic_references(
            &self.feedback(),
            &self.prep.received,
            self.prep.sync.offset,
            self.cfg,
            &self.tx.shaping,
        )?;
        let received_taps = n * self.cfg.taps_per_branch;
        let ref_taps: usize = refs.catalog.iter().map(|d| d.taps).sum();
        for w in &mut self.taps {
            w.truncate(received_taps);
            w.resize(received_taps + ref_taps, Complex64::new(0.0, 0.0));
        }
        self.catalog.truncate(n);
        self.branches.truncate(n);
        for (d, w) in refs.catalog.into_iter().zip(refs.waveforms) {
            let fe = if d.kind == BranchKind::Dc {
                w
            } else {
                front_end(&w, &self.tx.shaping, self.cfg.matched_filter)?
            };
            self.catalog.push(d);
            self.branches.push(fe);
        }
        Ok(())
    }

    fn finish(self) -> EqualizedOutput {
        let taps = unflatten(&self.taps, &self.catalog);
        let report = tap_report(&taps, &self.catalog, &self.labels);
        let last = self.iterations.last().expect("at least one iteration");
        let symbols = last.symbols.clone();
        let decisions = symbols.iter().map(|y| qpsk_demap(y)).collect();
        EqualizedOutput {
            labels: self.labels,
            symbols,
            decisions,
            tap_report: report,
            state: EqualizerState {
                taps,
                branch_catalog: self.catalog,
                mse_history: self.mse_history,
            },
            sync: self.prep.sync,
            counted: self.prep.counted,
            iterations: self.iterations,
        }
    }
}

/// Conventional linear MIMO equalization: one pass over the received branches.
///
/// Only the first `cfg.training_length` transmitted symbols steer the
/// adaptation; the rest of `tx` is used for scoring.
pub fn linear_mimo_equalize(
    rx: &WaveformFrame,
    cfg: &EqualizerConfig,
    tx: &TxRecord,
) -> Result<EqualizedOutput> {
    let mut e = Engine::new(rx, cfg, tx)?;
    e.iterate()?;
    Ok(e.finish())
}

/// Iteration 1 is [`linear_mimo_equalize`]; each further iteration rebuilds the
/// references from feedback symbols and re-adapts over the augmented branch
/// set, starting from the previous received-branch taps.
pub fn upic_mimo_equalize(
    rx: &WaveformFrame,
    cfg: &EqualizerConfig,
    tx: &TxRecord,
) -> Result<EqualizedOutput> {
    let mut e = Engine::new(rx, cfg, tx)?;
    e.iterate()?;
    for _ in 1..cfg.iterations {
        e.rebuild_references()?;
        e.iterate()?;
    }
    Ok(e.finish())
}
