use serde::{Deserialize, Serialize};

use super::{random_unitary, CMatrix, ChannelModel};
use crate::dsp::{Complex64, SimRng};
use crate::error::{Error, Result};
use crate::units::db_serde;

fn default_modes() -> usize {
    3
}

fn default_true() -> bool {
    true
}

fn default_launch() -> f64 {
    45.0
}

/// Weakly coupled few-mode fibre: the fundamental mode carries the pilot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmfSpec {
    /// Spatial modes including the fundamental; each carries two polarizations.
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    /// Pilot-to-signal-group intensity leakage; `-inf` for none.
    #[serde(with = "db_serde")]
    pub intergroup_xt_db: f64,
    /// Optional per-pilot-polarization leakage overriding `intergroup_xt_db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_pilot_xt_db: Option<Vec<f64>>,
    #[serde(default)]
    pub mdl_db: f64,
    /// Full random unitary within the higher-order mode group (both fibre ends).
    #[serde(default = "default_true")]
    pub intra_group_mixing: bool,
    /// Pilot SOP at launch relative to the fundamental-mode x axis.
    #[serde(default = "default_launch")]
    pub pt_launch_rotation_deg: f64,
    /// Realization seed. Scenario runs replace it with a per-trial seed.
    #[serde(default)]
    pub seed: u64,
}

impl MmfSpec {
    pub fn new(intergroup_xt_db: f64, mdl_db: f64, seed: u64) -> Self {
        Self {
            n_modes: 3,
            intergroup_xt_db,
            per_pilot_xt_db: None,
            mdl_db,
            intra_group_mixing: true,
            pt_launch_rotation_deg: default_launch(),
            seed,
        }
    }

    fn pilot_xt_db(&self) -> Vec<f64> {
        self.per_pilot_xt_db
            .clone()
            .unwrap_or_else(|| vec![self.intergroup_xt_db; 2])
    }
}

/// Channel labels for an `n_modes` fibre: higher-order modes first, LP01 last.
pub fn mmf_labels(n_modes: usize) -> Vec<String> {
    let names: Vec<String> = if n_modes == 3 {
        vec!["LP11a".into(), "LP11b".into()]
    } else {
        (1..n_modes).map(|i| format!("M{i}")).collect()
    };
    let mut labels: Vec<String> = names
        .iter()
        .flat_map(|n| [format!("{n}-X"), format!("{n}-Y")])
        .collect();
    labels.push("LP01-X".into());
    labels.push("LP01-Y".into());
    labels
}

/// Builds `H = D * U_out * G * U_in * R * P`.
///
/// `P` random input phases, `R` pilot launch rotation, `U_in`/`U_out`
/// random unitaries on the signal group (random phases on the pilot ports),
/// `G` one Givens rotation per pilot polarization into a signal channel
/// with `sin^2(theta) = leakage`, `D` mode-dependent loss. Because `U_in`
/// and `U_out` only act inside the signal group, the pilot leakage of the
/// lossless product is exactly the configured value.
pub fn build_mmf_channel(spec: &MmfSpec) -> Result<ChannelModel> {
    if spec.n_modes < 2 {
        return Err(Error::Parameter("need at least two modes".into()));
    }
    let xts = spec.pilot_xt_db();
    if xts.len() != 2 {
        return Err(Error::Parameter("per_pilot_xt_db needs two entries".into()));
    }
    for &x in &xts {
        if x > 0.0 || x.is_nan() {
            return Err(Error::Parameter(format!(
                "crosstalk {x} dB is infeasible (must be <= 0)"
            )));
        }
    }
    if !(spec.mdl_db >= 0.0 && spec.mdl_db.is_finite()) {
        return Err(Error::Parameter(format!("mdl {} dB", spec.mdl_db)));
    }
    let m = 2 * spec.n_modes;
    let n_sig = m - 2;
    let pilots = [n_sig, n_sig + 1];
    let mut rng = SimRng::new(spec.seed);

    let p = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(m, |_, _| rng.phasor()));

    let (s, c) = spec.pt_launch_rotation_deg.to_radians().sin_cos();
    let mut r = CMatrix::identity(m, m);
    r[(pilots[0], pilots[0])] = Complex64::new(c, 0.0);
    r[(pilots[0], pilots[1])] = Complex64::new(-s, 0.0);
    r[(pilots[1], pilots[0])] = Complex64::new(s, 0.0);
    r[(pilots[1], pilots[1])] = Complex64::new(c, 0.0);

    let block = |rng: &mut SimRng| -> CMatrix {
        let mut u = CMatrix::identity(m, m);
        if spec.intra_group_mixing {
            let v = random_unitary(n_sig, rng);
            u.view_mut((0, 0), (n_sig, n_sig)).copy_from(&v);
        }
        for &pl in &pilots {
            u[(pl, pl)] = rng.phasor();
        }
        u
    };
    let u_in = block(&mut rng);

    let mut g = CMatrix::identity(m, m);
    for (j, &pl) in pilots.iter().enumerate() {
        let leak = if xts[j] == f64::NEG_INFINITY {
            0.0
        } else {
            10f64.powf(xts[j] / 10.0)
        };
        let (sn, cs) = leak.sqrt().asin().sin_cos();
        let sig = j % n_sig;
        g[(sig, sig)] = Complex64::new(cs, 0.0);
        g[(pl, pl)] = Complex64::new(cs, 0.0);
        g[(sig, pl)] = Complex64::new(sn, 0.0);
        g[(pl, sig)] = Complex64::new(-sn, 0.0);
    }
    let u_out = block(&mut rng);

    let mut gains: Vec<f64> = (0..m)
        .map(|i| {
            let frac = if m > 1 { i as f64 / (m - 1) as f64 } else { 0.0 };
            10f64.powf(-spec.mdl_db * frac / 20.0)
        })
        .collect();
    // random assignment of loss levels to ports
    for i in (1..m).rev() {
        let j = (rng.uniform() * (i + 1) as f64) as usize;
        gains.swap(i, j.min(i));
    }
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(m, |i, _| {
        Complex64::new(gains[i], 0.0)
    }));

    let h = d * u_out * g * u_in * r * p;
    let mut model = ChannelModel::from_transfer(mmf_labels(spec.n_modes), pilots.to_vec(), h, spec.seed)?;
    model.mdl_gains = gains;
    model.mdl_db = spec.mdl_db;
    Ok(model)
}
