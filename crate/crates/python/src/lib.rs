//! Python bindings for the SDM self-homodyne simulator.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use sdm_shcd::harness::{
    detect_trial, equalize_scheme, replay as replay_manifest, results_csv, run_scenario, simulate,
    taps_csv, validate_config, Preset, ScenarioConfig, Scheme, SweepResult, TrialSeeds,
};
use sdm_shcd::rx::interference_powers;
use sdm_shcd::{metrics, txgen, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Parameter(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn scheme_from(name: &str) -> PyResult<Scheme> {
    match name {
        "linear" => Ok(Scheme::Linear),
        "upic1" => Ok(Scheme::Upic1),
        "upic12" => Ok(Scheme::Upic12),
        other => Err(PyValueError::new_err(format!(
            "unknown scheme {other:?} (linear, upic1, upic12)"
        ))),
    }
}

/// A scenario configuration (transmitter, channel, receiver, equalizer, sweep).
#[pyclass(name = "Scenario", module = "pyshcd")]
struct PyScenario {
    cfg: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    /// Starter configuration: "coupler", "mmf3" or "custom".
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let p = Preset::from_name(name).map_err(py_err)?;
        Ok(Self {
            cfg: ScenarioConfig::preset(p),
        })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            cfg: ScenarioConfig::from_toml_str(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            cfg: ScenarioConfig::from_json_str(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            cfg: ScenarioConfig::load(&path).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.cfg.to_toml_string().map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.cfg.to_json_string().map_err(py_err)
    }

    /// List of violation messages; empty when the configuration is runnable.
    fn violations(&self) -> Vec<String> {
        validate_config(&self.cfg).violations
    }

    #[getter]
    fn aggregate_bit_rate_gbps(&self) -> f64 {
        validate_config(&self.cfg).aggregate_bit_rate_gbps
    }

    #[getter]
    fn name(&self) -> String {
        self.cfg.name.clone()
    }

    #[getter]
    fn sweep_variable(&self) -> &'static str {
        self.cfg.sweep.variable.name()
    }

    #[getter]
    fn sweep_values(&self) -> Vec<f64> {
        self.cfg.sweep.values.clone()
    }

    #[setter]
    fn set_sweep_values(&mut self, values: Vec<f64>) {
        self.cfg.sweep.values = values;
    }

    #[getter]
    fn trials_per_point(&self) -> usize {
        self.cfg.trials_per_point
    }

    #[setter]
    fn set_trials_per_point(&mut self, n: usize) {
        self.cfg.trials_per_point = n;
    }

    #[getter]
    fn schemes(&self) -> Vec<&'static str> {
        self.cfg.schemes.iter().map(|s| s.name()).collect()
    }

    #[setter]
    fn set_schemes(&mut self, names: Vec<String>) -> PyResult<()> {
        self.cfg.schemes = names.iter().map(|n| scheme_from(n)).collect::<PyResult<_>>()?;
        Ok(())
    }

    /// Sets the number of transmitted and training symbols together.
    fn set_frame(&mut self, n_symbols: usize, training_length: usize) {
        self.cfg.tx.n_symbols = n_symbols;
        self.cfg.tx.training_length = training_length;
        self.cfg.eq.training_length = training_length;
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.cfg.output_dir.clone()
    }

    #[setter]
    fn set_output_dir(&mut self, dir: PathBuf) {
        self.cfg.output_dir = dir;
    }

    #[getter]
    fn constellation_symbols(&self) -> usize {
        self.cfg.constellation_symbols
    }

    #[setter]
    fn set_constellation_symbols(&mut self, n: usize) {
        self.cfg.constellation_symbols = n;
    }

    /// Runs the sweep in memory.
    fn simulate(&self, py: Python<'_>) -> PyResult<PySweepResult> {
        let cfg = self.cfg.clone();
        let r = py.detach(move || simulate(&cfg)).map_err(py_err)?;
        Ok(PySweepResult { inner: r })
    }

    /// Runs the sweep and writes results into `output_dir`.
    fn run(&self, py: Python<'_>) -> PyResult<PySweepResult> {
        let cfg = self.cfg.clone();
        let r = py.detach(move || run_scenario(&cfg)).map_err(py_err)?;
        Ok(PySweepResult { inner: r })
    }

    /// Detects one trial at `sweep_value` and returns its interference term powers.
    fn term_powers<'py>(
        &self,
        py: Python<'py>,
        sweep_value: f64,
        trial: usize,
    ) -> PyResult<Bound<'py, PyList>> {
        let t = detect_trial(&self.cfg, sweep_value, TrialSeeds::derive(self.cfg.seed, trial))
            .map_err(py_err)?;
        let out = PyList::empty(py);
        for p in interference_powers(&t.beats).map_err(py_err)? {
            let d = PyDict::new(py);
            d.set_item("channel", p.channel)?;
            d.set_item("desired_dbm", p.desired_dbm)?;
            d.set_item("dc_db", p.dc_db)?;
            d.set_item("first_order_db", p.first_order_db)?;
            d.set_item("second_order_db", p.second_order_db)?;
            out.append(d)?;
        }
        Ok(out)
    }

    /// Detected waveforms of one trial, one list of complex samples per signal port.
    fn detected(&self, sweep_value: f64, trial: usize) -> PyResult<Vec<Vec<Complex64>>> {
        let t = detect_trial(&self.cfg, sweep_value, TrialSeeds::derive(self.cfg.seed, trial))
            .map_err(py_err)?;
        Ok(t.rx.into_channels())
    }

    /// Detects and equalizes one trial with `scheme`.
    fn equalize<'py>(
        &self,
        py: Python<'py>,
        sweep_value: f64,
        trial: usize,
        scheme: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let scheme = scheme_from(scheme)?;
        let cfg = self.cfg.clone();
        let eq = py
            .detach(move || {
                let t = detect_trial(&cfg, sweep_value, TrialSeeds::derive(cfg.seed, trial))?;
                equalize_scheme(scheme, &cfg, &t.rx, &t.tx)
            })
            .map_err(py_err)?;
        let d = PyDict::new(py);
        let ber = eq.final_ber();
        d.set_item("labels", eq.labels.clone())?;
        d.set_item("ber", ber.ber)?;
        d.set_item("bit_errors", ber.bit_errors)?;
        d.set_item("bits_counted", ber.bits_counted)?;
        d.set_item("ci95", ber.ci95_halfwidth)?;
        d.set_item(
            "per_iteration_ber",
            eq.iterations.iter().map(|i| i.ber.ber).collect::<Vec<_>>(),
        )?;
        d.set_item(
            "per_iteration_evm_db",
            eq.iterations.iter().map(|i| i.evm_db).collect::<Vec<_>>(),
        )?;
        d.set_item("sync_offset", eq.sync.offset)?;
        let (start, end) = eq.counted;
        d.set_item("counted", (start, end))?;
        d.set_item(
            "symbols",
            eq.symbols.iter().map(|s| s[start..end].to_vec()).collect::<Vec<_>>(),
        )?;
        let taps = PyList::empty(py);
        for t in &eq.tap_report {
            let row = PyDict::new(py);
            row.set_item("output_ch", &t.output_ch)?;
            row.set_item("branch_kind", t.branch_kind)?;
            row.set_item("branch_detail", &t.branch_detail)?;
            row.set_item("norm_db", t.norm_db)?;
            taps.append(row)?;
        }
        d.set_item("taps", taps)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario({:?}, sweep {} over {:?}, {} trials)",
            self.cfg.name,
            self.cfg.sweep.variable.name(),
            self.cfg.sweep.values,
            self.cfg.trials_per_point
        )
    }
}

/// Rows and tap reports of a finished sweep.
#[pyclass(name = "SweepResult", module = "pyshcd")]
struct PySweepResult {
    inner: SweepResult,
}

#[pymethods]
impl PySweepResult {
    #[getter]
    fn failures(&self) -> usize {
        self.inner.failures
    }

    /// results.csv rows as dicts.
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let out = PyList::empty(py);
        for r in &self.inner.rows {
            let d = PyDict::new(py);
            d.set_item("scenario", &r.scenario)?;
            d.set_item("sweep_variable", &r.sweep_variable)?;
            d.set_item("sweep_value", r.sweep_value)?;
            d.set_item("trial", r.trial)?;
            d.set_item("scheme", r.scheme.name())?;
            d.set_item("channel", &r.channel)?;
            d.set_item("ber", r.ber)?;
            d.set_item("ci95", r.ci95)?;
            d.set_item("evm_db", r.evm_db)?;
            d.set_item("fec_pass", r.fec_pass)?;
            d.set_item("status", &r.status)?;
            d.set_item("bit_errors", r.bit_errors)?;
            d.set_item("bits_counted", r.bits_counted)?;
            out.append(d)?;
        }
        Ok(out)
    }

    /// taps.csv rows as dicts.
    fn taps<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let out = PyList::empty(py);
        for t in &self.inner.taps {
            let d = PyDict::new(py);
            d.set_item("sweep_value", t.sweep_value)?;
            d.set_item("trial", t.trial)?;
            d.set_item("scheme", t.scheme.name())?;
            d.set_item("output_ch", &t.output_ch)?;
            d.set_item("branch_kind", &t.branch_kind)?;
            d.set_item("branch_detail", &t.branch_detail)?;
            d.set_item("norm_db", t.norm_db)?;
            out.append(d)?;
        }
        Ok(out)
    }

    fn results_csv(&self) -> PyResult<String> {
        let bytes = results_csv(&self.inner.rows).map_err(py_err)?;
        String::from_utf8(bytes).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn taps_csv(&self) -> PyResult<String> {
        let bytes = taps_csv(&self.inner.taps).map_err(py_err)?;
        String::from_utf8(bytes).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

/// Re-runs a manifest; returns True/False for identical results.csv, None if there is no original.
#[pyfunction]
#[pyo3(signature = (manifest, out=None))]
fn replay(py: Python<'_>, manifest: PathBuf, out: Option<PathBuf>) -> PyResult<Option<bool>> {
    let o = py
        .detach(move || replay_manifest(&manifest, out.as_deref()))
        .map_err(py_err)?;
    Ok(o.identical)
}

/// Gray-mapped unit-power QPSK symbols from a flat bit list.
#[pyfunction]
fn qpsk_map(bits: Vec<u8>) -> PyResult<Vec<Complex64>> {
    txgen::qpsk_map(&bits).map_err(py_err)
}

#[pyfunction]
fn qpsk_demap(symbols: Vec<Complex64>) -> Vec<u8> {
    txgen::qpsk_demap(&symbols)
}

/// (bit_errors, bits_counted, ber, ci95_halfwidth) after skipping `skip` bits.
#[pyfunction]
#[pyo3(signature = (tx_bits, rx_bits, skip=0))]
fn count_ber(tx_bits: Vec<u8>, rx_bits: Vec<u8>, skip: usize) -> PyResult<(u64, u64, f64, f64)> {
    let r = metrics::count_ber(&tx_bits, &rx_bits, skip).map_err(py_err)?;
    Ok((r.bit_errors, r.bits_counted, r.ber, r.ci95_halfwidth))
}

#[pyfunction]
#[pyo3(signature = (errors, n, z=metrics::Z95))]
fn wilson_interval(errors: u64, n: u64, z: f64) -> (f64, f64) {
    metrics::wilson_interval(errors, n, z)
}

#[pyfunction]
fn q_factor_db(ber: f64) -> f64 {
    metrics::q_factor_db(ber)
}

#[pyfunction]
fn evm_db(symbols: Vec<Complex64>, reference: Vec<Complex64>) -> PyResult<f64> {
    metrics::evm_db(&symbols, &reference).map_err(py_err)
}

#[pymodule]
fn pyshcd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PySweepResult>()?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(qpsk_map, m)?)?;
    m.add_function(wrap_pyfunction!(qpsk_demap, m)?)?;
    m.add_function(wrap_pyfunction!(count_ber, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(q_factor_db, m)?)?;
    m.add_function(wrap_pyfunction!(evm_db, m)?)?;
    m.add("FEC_THRESHOLD", metrics::FEC_THRESHOLD)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
