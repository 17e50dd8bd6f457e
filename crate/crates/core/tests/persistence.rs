use reconlab::config::{ExperimentConfig, Profile};
use reconlab::nn::{init_params, MlpArchitecture};
use reconlab::persist::{config_hash, load_params, save_params};
use reconlab::shadow::{Featurizer, ShadowSet};

#[test]
fn params_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let arch = MlpArchitecture::parse("8-5-3:tanh").unwrap();
    let p = init_params(&arch, 3);
    let path = dir.path().join("m.params");
    save_params(&path, &p, &[("note", "x y".into())]).unwrap();
    let (q, meta) = load_params(&path).unwrap();
    assert_eq!(q.arch(), p.arch());
    assert!(p.as_slice().iter().zip(q.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(meta, vec![("note".to_string(), "x y".to_string())]);
}

#[test]
fn truncated_params_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let arch = MlpArchitecture::parse("4-2:relu").unwrap();
    let path = dir.path().join("m.params");
    save_params(&path, &init_params(&arch, 1), &[]).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_params(&path).is_err());
}

#[test]
fn shadow_set_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let arch = MlpArchitecture::parse("3-2-2:elu").unwrap();
    let models: Vec<_> = (0..5).map(|s| init_params(&arch, s)).collect();
    let features: Vec<Vec<f64>> = models.iter().map(|m| m.as_slice().to_vec()).collect();
    let targets: Vec<Vec<f64>> = (0..5).map(|i| vec![0.1 * i as f64, 0.5, 1.0]).collect();
    let set = ShadowSet::new(features, targets, vec![0, 1, 0, 1, 1], Featurizer::WhiteBoxFlatten.describe()).unwrap();
    let path = dir.path().join("s.txt");
    set.save(&path, Some("run=1")).unwrap();
    let back = ShadowSet::load(&path).unwrap();
    assert_eq!(back.features, set.features);
    assert_eq!(back.targets, set.targets);
    assert_eq!(back.labels, set.labels);
    assert_eq!(back.featurizer, "whitebox");
    assert_eq!(back.stats().unwrap(), set.stats().unwrap());
}

#[test]
fn config_render_parse_is_stable() {
    for profile in [Profile::DeskSynthetic, Profile::DeskMnist14, Profile::FullMnist] {
        let cfg = ExperimentConfig::profile(profile);
        let again = ExperimentConfig::parse(&cfg.render()).unwrap();
        assert_eq!(again.render(), cfg.render());
        assert_eq!(again.hash(), cfg.hash());
    }
    let mut cfg = ExperimentConfig::profile(Profile::DeskSynthetic);
    let h = cfg.hash();
    cfg.out_dir = "elsewhere".into();
    assert_eq!(cfg.hash(), h);
    cfg.set("model.epochs", "51").unwrap();
    assert_ne!(cfg.hash(), h);
    assert_eq!(config_hash("abc"), "ba7816bf8f01cfea");
}
