use serde::{Deserialize, Serialize};

use super::{CMatrix, ChannelModel};
use crate::dsp::Complex64;
use crate::error::{Error, Result};

fn default_rotation() -> f64 {
    45.0
}

/// 2x2 optical coupler between a polarization-diverse signal and the pilot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerSpec {
    /// Power coupling ratio k in [0, 1].
    pub coupling_ratio_k: f64,
    /// SOP rotation of the pilot before the coupler.
    #[serde(default = "default_rotation")]
    pub pt_sop_rotation_deg: f64,
}

impl CouplerSpec {
    pub fn new(k: f64) -> Self {
        Self {
            coupling_ratio_k: k,
            pt_sop_rotation_deg: default_rotation(),
        }
    }
}

/// Channel labels of the coupler layout.
pub const COUPLER_LABELS: [&str; 4] = ["SIG-X", "SIG-Y", "PT-X", "PT-Y"];

/// Builds the four-channel coupler channel `C * (I (+) R)`.
///
/// `R` rotates the pilot's polarization; `C` couples each signal
/// polarization with the same pilot polarization through
/// `[[sqrt(1-k), j sqrt(k)], [j sqrt(k), sqrt(1-k)]]`.
pub fn build_coupler_channel(spec: &CouplerSpec) -> Result<ChannelModel> {
    let k = spec.coupling_ratio_k;
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::Parameter(format!("coupling ratio {k} outside [0, 1]")));
    }
    if !spec.pt_sop_rotation_deg.is_finite() {
        return Err(Error::Parameter("pilot rotation must be finite".into()));
    }
    let (s, c) = spec.pt_sop_rotation_deg.to_radians().sin_cos();
    let mut rot = CMatrix::identity(4, 4);
    rot[(2, 2)] = Complex64::new(c, 0.0);
    rot[(2, 3)] = Complex64::new(-s, 0.0);
    rot[(3, 2)] = Complex64::new(s, 0.0);
    rot[(3, 3)] = Complex64::new(c, 0.0);

    let through = Complex64::new((1.0 - k).sqrt(), 0.0);
    let cross = Complex64::new(0.0, k.sqrt());
    let mut coupler = CMatrix::zeros(4, 4);
    for pol in 0..2 {
        let (sig, pt) = (pol, 2 + pol);
        coupler[(sig, sig)] = through;
        coupler[(pt, pt)] = through;
        coupler[(sig, pt)] = cross;
        coupler[(pt, sig)] = cross;
    }
    ChannelModel::from_transfer(
        COUPLER_LABELS.iter().map(|s| s.to_string()).collect(),
        vec![2, 3],
        coupler * rot,
        0,
    )
}
