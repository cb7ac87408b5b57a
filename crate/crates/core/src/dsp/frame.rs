use std::collections::HashSet;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Multi-channel complex baseband waveform.
///
/// Channels share one sample clock; `sample_rate = symbol_rate * samples_per_symbol`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformFrame {
    channels: Vec<Vec<Complex64>>,
    sample_rate: f64,
    samples_per_symbol: usize,
    labels: Vec<String>,
}

impl WaveformFrame {
    pub fn new(
        channels: Vec<Vec<Complex64>>,
        sample_rate: f64,
        samples_per_symbol: usize,
        labels: Vec<String>,
    ) -> Result<Self> {
        if channels.len() != labels.len() {
            return Err(Error::Parameter(format!(
                "{} channels but {} labels",
                channels.len(),
                labels.len()
            )));
        }
        if let Some(first) = channels.first() {
            if channels.iter().any(|c| c.len() != first.len()) {
                return Err(Error::Parameter("channels differ in length".into()));
            }
        }
        if samples_per_symbol == 0 {
            return Err(Error::Parameter("samples_per_symbol must be >= 1".into()));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Parameter(format!("sample rate {sample_rate}")));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Parameter(format!("duplicate channel label {l:?}")));
            }
        }
        Ok(Self {
            channels,
            sample_rate,
            samples_per_symbol,
            labels,
        })
    }

    /// All-zero frame with the given shape.
    pub fn zeros(
        n_samples: usize,
        sample_rate: f64,
        samples_per_symbol: usize,
        labels: Vec<String>,
    ) -> Result<Self> {
        let channels = vec![vec![Complex64::new(0.0, 0.0); n_samples]; labels.len()];
        Self::new(channels, sample_rate, samples_per_symbol, labels)
    }

    pub fn channels(&self) -> &[Vec<Complex64>] {
        &self.channels
    }

    pub fn channel(&self, idx: usize) -> &[Complex64] {
        &self.channels[idx]
    }

    /// Mutable access to a channel's samples. Length must be preserved.
    pub fn channel_mut(&mut self, idx: usize) -> &mut [Complex64] {
        &mut self.channels[idx]
    }

    pub fn into_channels(self) -> Vec<Vec<Complex64>> {
        self.channels
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn symbol_rate(&self) -> f64 {
        self.sample_rate / self.samples_per_symbol as f64
    }

    /// Same clock and labels, new sample data.
    pub fn with_channels(&self, channels: Vec<Vec<Complex64>>) -> Result<Self> {
        Self::new(
            channels,
            self.sample_rate,
            self.samples_per_symbol,
            self.labels.clone(),
        )
    }

    /// Sample-wise sum of two frames of identical shape.
    pub fn add(&self, other: &WaveformFrame) -> Result<Self> {
        if self.labels != other.labels || self.len() != other.len() {
            return Err(Error::Parameter("frame shapes differ".into()));
        }
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        self.with_channels(channels)
    }
}
