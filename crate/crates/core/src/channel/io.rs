use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CMatrix, ChannelModel, Impairments};
use crate::dsp::Complex64;
use crate::error::{Error, Result};

pub const CHANNEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixParts {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

/// JSON form of a channel realization, sufficient to replay it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDocument {
    pub schema_version: u32,
    pub labels: Vec<String>,
    pub pilot_channels: Vec<usize>,
    #[serde(rename = "H")]
    pub h: MatrixParts,
    pub skews: Vec<f64>,
    #[serde(default)]
    pub port_skews: Vec<f64>,
    pub mdl_db: f64,
    #[serde(default)]
    pub mdl_gains: Option<Vec<f64>>,
    pub seed: u64,
    #[serde(default)]
    pub linewidth_hz: f64,
    #[serde(default)]
    pub differential_path_delay_s: f64,
    #[serde(with = "crate::units::db_serde", default = "neg_inf")]
    pub noise_power_dbm: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

impl From<&ChannelModel> for ChannelDocument {
    fn from(ch: &ChannelModel) -> Self {
        let m = ch.n_channels();
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m)
                .map(|i| (0..m).map(|j| f(&ch.transfer[(i, j)])).collect())
                .collect()
        };
        let imp = &ch.impairments;
        ChannelDocument {
            schema_version: CHANNEL_SCHEMA_VERSION,
            labels: ch.labels.clone(),
            pilot_channels: ch.pilot_channels.clone(),
            h: MatrixParts {
                re: rows(|c| c.re),
                im: rows(|c| c.im),
            },
            skews: if imp.skews.is_empty() {
                vec![0.0; m]
            } else {
                imp.skews.clone()
            },
            port_skews: imp.port_skews.clone(),
            mdl_db: ch.mdl_db,
            mdl_gains: Some(ch.mdl_gains.clone()),
            seed: ch.seed,
            linewidth_hz: imp.linewidth_hz,
            differential_path_delay_s: imp.differential_path_delay_s,
            noise_power_dbm: imp.noise_power_dbm,
        }
    }
}

impl ChannelDocument {
    pub fn into_model(self) -> Result<ChannelModel> {
        if self.schema_version != CHANNEL_SCHEMA_VERSION {
            return Err(Error::Serde(format!(
                "channel schema version {} (expected {CHANNEL_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let m = self.labels.len();
        let shape_ok = |p: &Vec<Vec<f64>>| p.len() == m && p.iter().all(|r| r.len() == m);
        if !shape_ok(&self.h.re) || !shape_ok(&self.h.im) {
            return Err(Error::Serde(format!("H must be {m}x{m}")));
        }
        let h = CMatrix::from_fn(m, m, |i, j| Complex64::new(self.h.re[i][j], self.h.im[i][j]));
        let mut model = ChannelModel::from_transfer(self.labels, self.pilot_channels, h, self.seed)?;
        if let Some(g) = self.mdl_gains {
            if g.len() != m || g.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Serde("mdl_gains must be positive, one per channel".into()));
            }
            model.mdl_gains = g;
        }
        model.mdl_db = self.mdl_db;
        model.with_impairments(Impairments {
            skews: self.skews,
            port_skews: self.port_skews,
            linewidth_hz: self.linewidth_hz,
            differential_path_delay_s: self.differential_path_delay_s,
            noise_power_dbm: self.noise_power_dbm,
        })
    }
}

impl ChannelModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ChannelDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<ChannelDocument>(s)?.into_model()
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
