use sdm_shcd::channel::ChannelModel;
use sdm_shcd::dsp::SimRng;
use sdm_shcd::equalizer::{linear_mimo_equalize, upic_mimo_equalize};
use sdm_shcd::harness::{run_scenario, Preset, ScenarioConfig, Scheme, CONSTELLATION_DIR};
use sdm_shcd::metrics::{constellation_file_name, read_constellation};
use sdm_shcd::rx::shcd_detect;
use sdm_shcd::txgen::generate_tx;

fn mmf_at(pspr_db: f64, n_symbols: usize, seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::preset(Preset::Mmf3);
    c.tx.n_symbols = n_symbols;
    c.tx.training_length = 4096;
    c.eq.training_length = 4096;
    c.tx.seed = seed;
    c.at_point(pspr_db).unwrap()
}

#[test]
fn mmf_end_to_end_upic_beats_linear() {
    let cfg = mmf_at(6.0, 4096 + 16384, 3);
    let tx = generate_tx(&cfg.tx).unwrap();
    let ch = cfg
        .channel
        .build(3)
        .unwrap()
        .with_impairments(cfg.impairments.clone())
        .unwrap();
    let field = ch
        .propagate_split(&ch.launch(&tx.frame).unwrap(), &mut SimRng::stream(3, 0))
        .unwrap();
    let (rx, _) = shcd_detect(&field, &cfg.rx, &mut SimRng::stream(3, 1)).unwrap();
    assert_eq!(rx.labels(), &tx.frame.labels()[..4]);

    let lin = linear_mimo_equalize(&rx, &Scheme::Linear.equalizer_config(&cfg.eq), &tx).unwrap();
    let upic = upic_mimo_equalize(&rx, &Scheme::Upic12.equalizer_config(&cfg.eq), &tx).unwrap();
    assert_eq!(upic.iterations.len(), cfg.eq.iterations);
    let (l, u) = (lin.final_ber().ber, upic.final_ber().ber);
    assert!(l > 0.0, "scenario should have errors to remove");
    assert!(u < l / 2.0, "linear {l} upic {u}");
    // iteration 1 of UPIC is the linear equalizer
    assert_eq!(upic.iterations[0].ber.ber, l);
}

#[test]
fn channel_document_replays_reception() {
    let cfg = mmf_at(9.0, 4096 + 2048, 5);
    let tx = generate_tx(&cfg.tx).unwrap();
    let ch = cfg.channel.build(11).unwrap();
    let back = ChannelModel::from_json(&ch.to_json().unwrap()).unwrap();
    let launch = ch.launch(&tx.frame).unwrap();
    let a = ch.propagate(&launch, &mut SimRng::new(1)).unwrap();
    let b = back.propagate(&launch, &mut SimRng::new(1)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn scenario_outputs_are_readable() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ScenarioConfig::preset(Preset::Coupler);
    c.tx.n_symbols = 3000;
    c.tx.training_length = 1024;
    c.eq.training_length = 1024;
    c.sweep.values = vec![-6.0];
    c.trials_per_point = 1;
    c.constellation_symbols = 100;
    c.output_dir = dir.path().to_path_buf();
    let result = run_scenario(&c).unwrap();
    assert_eq!(result.failures, 0);

    let point = std::fs::read_dir(dir.path().join(CONSTELLATION_DIR))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    for scheme in [Scheme::Linear, Scheme::Upic1, Scheme::Upic12] {
        let iters = if scheme == Scheme::Linear { 1 } else { c.eq.iterations };
        for label in ["SIG-X", "SIG-Y"] {
            let f = point.join(constellation_file_name(scheme.name(), label, iters));
            let pts = read_constellation(&f).unwrap();
            assert_eq!(pts.len(), 100, "{}", f.display());
        }
    }

    let mut rdr = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
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
            "status"
        ]
    );
    // two channels plus the aggregate, for each of three schemes
    assert_eq!(rdr.records().count(), 9);
}
