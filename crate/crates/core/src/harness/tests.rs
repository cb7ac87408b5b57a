use super::*;

/// A preset shrunk to run in well under a second.
fn tiny(preset: Preset) -> ScenarioConfig {
    let mut c = ScenarioConfig::preset(preset);
    c.tx.n_symbols = 3000;
    c.tx.training_length = 1024;
    c.eq.training_length = 1024;
    c.sweep.values.truncate(2);
    c.trials_per_point = 2;
    c.constellation_symbols = 16;
    c
}

#[test]
fn presets_validate() {
    let v = validate_config(&ScenarioConfig::preset(Preset::Mmf3));
    assert!(v.is_ok(), "{:?}", v.violations);
    assert_eq!(v.aggregate_bit_rate_gbps, 240.0);
    let v = validate_config(&ScenarioConfig::preset(Preset::Coupler));
    assert!(v.is_ok(), "{:?}", v.violations);
    assert_eq!(v.aggregate_bit_rate_gbps, 40.0);
}

#[test]
fn violations_are_listed() {
    let mut c = ScenarioConfig::preset(Preset::Mmf3);
    c.eq.taps_per_branch = 30;
    assert!(validate_config(&c)
        .violations
        .iter()
        .any(|v| v.contains("taps_per_branch")));
    let mut c = ScenarioConfig::preset(Preset::Mmf3);
    c.sweep.values.clear();
    assert!(validate_config(&c)
        .violations
        .iter()
        .any(|v| v.contains("sweep.values")));
    let mut c = ScenarioConfig::preset(Preset::Mmf3);
    c.sweep.variable = SweepVariable::CouplingRatio;
    assert!(!validate_config(&c).is_ok());
    let mut c = ScenarioConfig::preset(Preset::Coupler);
    c.rx.lo_channel_labels = vec!["LP01-X".into()];
    assert!(!validate_config(&c).is_ok());
}

#[test]
fn toml_and_json_round_trip() {
    for p in [Preset::Coupler, Preset::Mmf3, Preset::Custom] {
        let c = ScenarioConfig::preset(p);
        let t = c.to_toml_string().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&t).unwrap(), c);
        let j = c.to_json_string().unwrap();
        assert_eq!(ScenarioConfig::from_json_str(&j).unwrap(), c);
    }
}

#[test]
fn unknown_fields_rejected() {
    let mut t = ScenarioConfig::preset(Preset::Coupler).to_toml_string().unwrap();
    t.push_str("\nbogus = 1\n");
    assert!(ScenarioConfig::from_toml_str(&t).is_err());
}

#[test]
fn sweep_points_apply() {
    let c = ScenarioConfig::preset(Preset::Mmf3);
    let p = c.at_point(5.0).unwrap();
    assert_eq!(p.tx.signal_power_dbm, 5.0);
    assert_eq!(p.tx.pspr_tx_db(), 5.0);
    let mut c = ScenarioConfig::preset(Preset::Coupler);
    c.sweep.variable = SweepVariable::CouplingRatio;
    match c.at_point(0.03).unwrap().channel {
        ChannelSpec::Coupler(s) => assert_eq!(s.coupling_ratio_k, 0.03),
        _ => unreachable!(),
    }
}

#[test]
fn seeds_depend_on_trial_only() {
    let a = TrialSeeds::derive(7, 0);
    let b = TrialSeeds::derive(7, 1);
    assert_ne!(a.tx_seed, b.tx_seed);
    assert_ne!(a.tx_seed, a.channel_seed);
    assert_eq!(a, TrialSeeds::derive(7, 0));
}

#[test]
fn row_count_and_order() {
    let c = tiny(Preset::Coupler);
    let r = simulate(&c).unwrap();
    assert_eq!(r.failures, 0);
    let agg: Vec<&ResultRow> = r.aggregate_rows().collect();
    assert_eq!(agg.len(), 2 * 2 * 3);
    assert_eq!(r.rows.len(), 2 * 2 * 3 * 3);
    for w in agg.windows(2) {
        let key = |x: &ResultRow| (x.sweep_value, x.trial, x.scheme);
        assert!(key(w[0]) < key(w[1]));
    }
    assert!(r.rows.iter().all(|x| x.status == "ok"));
    // trial 0 only, 3 schemes, iterations 1 / 2 / 2, 2 channels
    assert_eq!(r.constellations.len(), 2 * (1 + 2 + 2) * 2);
}

#[test]
fn errors_become_status_rows() {
    let mut c = tiny(Preset::Coupler);
    c.tx.pt_power_dbm = -45.0;
    let r = simulate(&c).unwrap();
    assert_eq!(r.failures, 2 * 2 * 3);
    assert!(r.rows.iter().all(|x| x.status.starts_with("error: ")));
}

#[test]
fn outputs_and_replay_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = tiny(Preset::Mmf3);
    c.output_dir = dir.path().join("run");
    run_scenario(&c).unwrap();
    let results = std::fs::read_to_string(c.output_dir.join(RESULTS_FILE)).unwrap();
    assert!(results.starts_with(
        "scenario,sweep_variable,sweep_value,trial,scheme,channel,ber,ci95,evm_db,fec_pass,status\n"
    ));
    let taps = std::fs::read_to_string(c.output_dir.join(TAPS_FILE)).unwrap();
    assert!(taps.starts_with("sweep_value,trial,scheme,output_ch,branch_kind,branch_detail,norm_db\n"));
    let m = Manifest::load(&c.output_dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.config, c);
    for f in &m.files {
        assert!(c.output_dir.join(f).exists(), "{f}");
    }
    let out = replay(&c.output_dir.join(MANIFEST_FILE), None).unwrap();
    assert_eq!(out.identical, Some(true));
    assert_eq!(
        std::fs::read(c.output_dir.join(TAPS_FILE)).unwrap(),
        std::fs::read(out.output_dir.join(TAPS_FILE)).unwrap()
    );
}

#[test]
fn preset_names() {
    assert_eq!(Preset::from_name("mmf3").unwrap(), Preset::Mmf3);
    assert!(Preset::from_name("mmf5").is_err());
}
