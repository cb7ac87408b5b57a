use std::path::PathBuf;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no correlation peak: {0}")]
    NoPeak(String),
    #[error("frame sync failed: peak-to-sidelobe ratio {ratio:.2} below {threshold}")]
    SyncFailure { ratio: f64, threshold: f64 },
    #[error("local oscillator starved on {label}: mean power {power_dbm:.1} dBm")]
    LoStarved { label: String, power_dbm: f64 },
    #[error("equalizer diverged on output {output} at symbol {symbol}")]
    Divergence { output: usize, symbol: usize },
    #[error("skew estimate {estimate:.2} samples outside +/-{limit:.1} for {branch}")]
    SkewOutOfRange {
        branch: String,
        estimate: f64,
        limit: f64,
    },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
