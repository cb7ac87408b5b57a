use super::*;
use crate::dsp::{energy, mean_power};
use crate::txgen::{generate_tx, TxConfig};
use proptest::prelude::*;

fn tx(n_sig: usize, labels: Vec<String>) -> TxConfig {
    TxConfig {
        symbol_rate: 10e9,
        n_signal_channels: n_sig,
        samples_per_symbol: 2,
        n_symbols: 4096,
        roll_off: 0.1,
        rrc_span_symbols: 64,
        signal_power_dbm: 0.0,
        pt_power_dbm: 9.0,
        training_length: 256,
        seed: 11,
        signal_labels: Some(labels),
    }
}

fn coupler_frame() -> WaveformFrame {
    let rec = generate_tx(&tx(2, vec!["SIG-X".into(), "SIG-Y".into()])).unwrap();
    build_coupler_channel(&CouplerSpec::new(0.0))
        .unwrap()
        .launch(&rec.frame)
        .unwrap()
}

fn identity_model(labels: &[&str], pilots: Vec<usize>) -> ChannelModel {
    let m = labels.len();
    ChannelModel::from_transfer(
        labels.iter().map(|s| s.to_string()).collect(),
        pilots,
        CMatrix::identity(m, m),
        0,
    )
    .unwrap()
}

#[test]
fn coupler_zero_is_block_diagonal() {
    let ch = build_coupler_channel(&CouplerSpec::new(0.0)).unwrap();
    for s in 0..2 {
        for p in 2..4 {
            assert_eq!(ch.transfer[(s, p)].norm(), 0.0);
            assert_eq!(ch.transfer[(p, s)].norm(), 0.0);
        }
    }
}

#[test]
fn coupler_leakage_matches_ratio_and_splits_evenly() {
    let ch = build_coupler_channel(&CouplerSpec::new(0.01)).unwrap();
    let leak = ch.pilot_leakage()[0];
    assert!((10.0 * leak.log10() + 20.0).abs() < 1e-9);
    // pilot input is PT-X; 45 degrees splits it over both signal polarizations
    for s in 0..2 {
        assert!((ch.transfer[(s, 2)].norm_sqr() - 0.005).abs() < 1e-12);
    }
}

#[test]
fn coupler_is_unitary_for_all_ratios() {
    for i in 0..=20 {
        let k = i as f64 / 20.0;
        let ch = build_coupler_channel(&CouplerSpec::new(k)).unwrap();
        assert!(ch.unitarity_error() < 1e-12, "k = {k}");
    }
    assert!(build_coupler_channel(&CouplerSpec::new(1.2)).is_err());
    assert!(build_coupler_channel(&CouplerSpec::new(-0.1)).is_err());
}

#[test]
fn mmf_leakage_by_construction() {
    let ch = build_mmf_channel(&MmfSpec::new(-7.0, 0.0, 3)).unwrap();
    for leak in ch.pilot_leakage() {
        assert!((leak - 10f64.powf(-0.7)).abs() < 1e-9, "{leak}");
    }
    assert_eq!(ch.labels.len(), 6);
    assert_eq!(ch.labels[4], "LP01-X");
}

#[test]
fn mmf_without_crosstalk_is_block_diagonal() {
    let ch = build_mmf_channel(&MmfSpec::new(f64::NEG_INFINITY, 0.0, 3)).unwrap();
    for s in ch.signal_channels() {
        for &p in &ch.pilot_channels {
            assert!(ch.transfer[(s, p)].norm() < 1e-15);
            assert!(ch.transfer[(p, s)].norm() < 1e-15);
        }
    }
}

#[test]
fn mmf_seed_determinism() {
    let a = build_mmf_channel(&MmfSpec::new(-9.0, 5.0, 21)).unwrap();
    let b = build_mmf_channel(&MmfSpec::new(-9.0, 5.0, 21)).unwrap();
    let c = build_mmf_channel(&MmfSpec::new(-9.0, 5.0, 22)).unwrap();
    assert_eq!(a.transfer, b.transfer);
    assert!((&a.transfer - &c.transfer).norm() > 0.0);
}

#[test]
fn mmf_mdl_spread() {
    for &mdl in &[0.0, 2.0, 5.0, 8.0] {
        let ch = build_mmf_channel(&MmfSpec::new(-10.0, mdl, 4)).unwrap();
        assert!((ch.realized_mdl_db() - mdl).abs() < 0.1, "{mdl}");
        assert!(ch.unitarity_error() < 1e-10);
    }
}

#[test]
fn mmf_rejects_positive_crosstalk() {
    assert!(build_mmf_channel(&MmfSpec::new(1.0, 0.0, 1)).is_err());
}

#[test]
fn identity_channel_is_transparent() {
    let frame = coupler_frame();
    let ch = identity_model(&COUPLER_LABELS_REF, vec![2, 3]);
    let out = ch.propagate(&frame, &mut SimRng::new(1)).unwrap();
    for c in 0..4 {
        for (a, b) in out.channel(c).iter().zip(frame.channel(c)) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

const COUPLER_LABELS_REF: [&str; 4] = ["SIG-X", "SIG-Y", "PT-X", "PT-Y"];

#[test]
fn lossless_channel_conserves_energy() {
    let frame = coupler_frame();
    let ch = build_coupler_channel(&CouplerSpec::new(0.3)).unwrap();
    let out = ch.propagate(&frame, &mut SimRng::new(1)).unwrap();
    let e_in: f64 = frame.channels().iter().map(|c| energy(c)).sum();
    let e_out: f64 = out.channels().iter().map(|c| energy(c)).sum();
    assert!(((e_out - e_in) / e_in).abs() < 1e-9);
}

#[test]
fn common_phase_noise_cancels_in_beat() {
    let frame = coupler_frame();
    let ch = identity_model(&COUPLER_LABELS_REF, vec![2, 3])
        .with_impairments(Impairments {
            linewidth_hz: 100e3,
            ..Impairments::default()
        })
        .unwrap();
    let out = ch.propagate(&frame, &mut SimRng::new(8)).unwrap();
    // signal times conj(pilot) has the transmitted phase, laser phase removed
    let mut worst: f64 = 0.0;
    for t in 0..frame.len() {
        let beat = out.channel(0)[t] * out.channel(2)[t].conj();
        let want = frame.channel(0)[t] * frame.channel(2)[t].conj();
        if want.norm() > 1e-3 {
            worst = worst.max((beat / want).arg().abs());
        }
    }
    assert!(worst < 1e-9, "{worst}");
    // and the laser phase itself is really there
    let drift = (out.channel(2)[frame.len() - 1] / frame.channel(2)[frame.len() - 1]).arg();
    assert!(drift.abs() > 0.0);
}

#[test]
fn differential_delay_leaves_residual_phase() {
    let frame = coupler_frame();
    let ch = identity_model(&COUPLER_LABELS_REF, vec![2, 3])
        .with_impairments(Impairments {
            linewidth_hz: 10e6,
            differential_path_delay_s: 5e-9,
            ..Impairments::default()
        })
        .unwrap();
    let out = ch.propagate(&frame, &mut SimRng::new(8)).unwrap();
    let t = frame.len() - 1;
    let beat = out.channel(0)[t] * out.channel(2)[t].conj();
    let want = frame.channel(0)[t] * frame.channel(2)[t].conj();
    assert!((beat / want).arg().abs() > 1e-6);
}

#[test]
fn split_fields_sum_to_total_and_noise_is_calibrated() {
    let frame = coupler_frame();
    let ch = build_coupler_channel(&CouplerSpec::new(0.05))
        .unwrap()
        .with_impairments(Impairments {
            noise_power_dbm: -10.0,
            ..Impairments::default()
        })
        .unwrap();
    let split = ch.propagate_split(&frame, &mut SimRng::new(2)).unwrap();
    let total = ch.propagate(&frame, &mut SimRng::new(2)).unwrap();
    assert_eq!(split.total(), total);
    let quiet = ch
        .clone()
        .with_impairments(Impairments::default())
        .unwrap()
        .propagate(&frame, &mut SimRng::new(2))
        .unwrap();
    let noise: Vec<Complex64> = total
        .channel(0)
        .iter()
        .zip(quiet.channel(0))
        .map(|(a, b)| a - b)
        .collect();
    assert!((mean_power(&noise) / 0.1 - 1.0).abs() < 0.05);
}

#[test]
fn propagation_is_linear() {
    let ch = build_mmf_channel(&MmfSpec::new(-8.0, 3.0, 5)).unwrap();
    let rec = generate_tx(&tx(
        4,
        vec!["LP11a-X".into(), "LP11a-Y".into(), "LP11b-X".into(), "LP11b-Y".into()],
    ))
    .unwrap();
    let x = ch.launch(&rec.frame).unwrap();
    let mut y_rec = tx(
        4,
        vec!["LP11a-X".into(), "LP11a-Y".into(), "LP11b-X".into(), "LP11b-Y".into()],
    );
    y_rec.seed = 99;
    let y = ch.launch(&generate_tx(&y_rec).unwrap().frame).unwrap();
    let (alpha, beta) = (Complex64::new(0.3, -1.1), Complex64::new(-2.0, 0.4));
    let combo = x
        .with_channels(
            x.channels()
                .iter()
                .zip(y.channels())
                .map(|(a, b)| a.iter().zip(b).map(|(u, v)| alpha * u + beta * v).collect())
                .collect(),
        )
        .unwrap();
    let ch = ch
        .with_impairments(Impairments {
            skews: vec![0.0, 1.5, -2.25, 0.0, 0.7, 0.0],
            ..Impairments::default()
        })
        .unwrap();
    let px = ch.propagate(&x, &mut SimRng::new(1)).unwrap();
    let py = ch.propagate(&y, &mut SimRng::new(1)).unwrap();
    let pc = ch.propagate(&combo, &mut SimRng::new(1)).unwrap();
    for c in 0..6 {
        for t in 0..x.len() {
            let want = alpha * px.channel(c)[t] + beta * py.channel(c)[t];
            assert!((pc.channel(c)[t] - want).norm() < 1e-10);
        }
    }
}

#[test]
fn shape_mismatch_is_rejected() {
    let frame = coupler_frame();
    let ch = build_mmf_channel(&MmfSpec::new(-8.0, 0.0, 5)).unwrap();
    assert!(matches!(
        ch.propagate(&frame, &mut SimRng::new(1)),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn json_round_trip_replays_realization() {
    let ch = build_mmf_channel(&MmfSpec::new(-7.0, 5.0, 77))
        .unwrap()
        .with_impairments(Impairments {
            skews: vec![0.0, 0.5, 0.0, 0.0, 0.0, 1.0],
            linewidth_hz: 1e5,
            ..Impairments::default()
        })
        .unwrap();
    let back = ChannelModel::from_json(&ch.to_json().unwrap()).unwrap();
    assert_eq!(back.transfer, ch.transfer);
    assert_eq!(back.mdl_gains, ch.mdl_gains);
    assert_eq!(back.impairments, ch.impairments);
    assert!(ChannelModel::from_json(r#"{"schema_version": 9}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn mmf_unitary_and_calibrated(seed in any::<u64>(), xt in -30.0f64..0.0, mixing in any::<bool>()) {
        let mut spec = MmfSpec::new(xt, 0.0, seed);
        spec.intra_group_mixing = mixing;
        let ch = build_mmf_channel(&spec).unwrap();
        prop_assert!(ch.unitarity_error() < 1e-10);
        for leak in ch.pilot_leakage() {
            prop_assert!((leak - 10f64.powf(xt / 10.0)).abs() < 1e-6);
        }
    }
}
