use std::path::Path;
use std::process::{Command, Output};

use reconlab::data::{load_csv, synth_classification, write_csv, SynthSpec};
use reconlab::glm::{write_regression_csv, RegressionData};
use reconlab::persist::load_params;
use reconlab::rng::Rng;
use reconlab::shadow::ShadowSet;

const SMALL: &[&str] = &[
    "--set", "split.fixed=60",
    "--set", "split.shadows=150",
    "--set", "split.probes=20",
    "--set", "split.targets=3",
    "--set", "model.epochs=10",
    "--set", "attack.batch_size=32",
    "--set", "attack.epochs=5",
    "--set", "dp.shadows=150",
    "--set", "dp.repeats=1",
];

fn reconlab(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reconlab"));
    cmd.args(args);
    if let Some(o) = out {
        cmd.arg("--out").arg(o).args(SMALL);
    }
    cmd.output().expect("spawn reconlab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key))
        .and_then(|v| v.trim().trim_start_matches('=').split_whitespace().next().map(str::to_owned))
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("{key} missing in\n{text}"))
}

#[test]
fn rero_bound_examples() {
    let o = reconlab(&["rero-bound", "--cor1", "--kappa", "0.01", "--eps", "2.302585"], None);
    assert!(o.status.success());
    assert!((field(&stdout(&o), "gamma") - 0.1).abs() < 1e-6);
    let o = reconlab(&["rero-bound", "--thm3", "--eps", "0", "--gamma", "0.75"], None);
    assert_eq!(field(&stdout(&o), "delta"), 0.5);
    let o = reconlab(&["rero-bound", "--kappa", "0.1"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = reconlab(&["rero-bound", "--cor1", "--kappa", "2", "--eps", "1"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rero_bound_appends_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let o = reconlab(&["rero-bound", "--prop1", "--d", "100", "--eta", "0.5", "--eps", "20", "--csv", csv.to_str().unwrap()], None);
    assert!(o.status.success());
    let gamma = field(&stdout(&o), "gamma");
    assert!((gamma / (20f64.exp() * 2f64.powi(-100)) - 1.0).abs() < 1e-9);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("d,eta,prior,privacy"));
    assert!(text.lines().nth(1).unwrap().ends_with("prop1"));
}

fn planted_csv(path: &Path, intercept: f64) -> (Vec<f64>, f64) {
    let mut rng = Rng::new(4).stream();
    use rand::Rng as _;
    let w = [0.7, -1.2, 0.4];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..80 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        ys.push(intercept + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.1 * rng.random_range(-1.0..1.0));
        xs.push(x);
    }
    let last = (xs[79].clone(), ys[79]);
    write_regression_csv(&RegressionData::new(xs, ys).unwrap(), path).unwrap();
    last
}

#[test]
fn glm_attack_recovers_planted_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reg.csv");
    planted_csv(&path, 0.5);
    for family in [["--family", "linear"], ["--family", "ridge"]] {
        let o = reconlab(&["glm-attack", "--data", path.to_str().unwrap(), family[0], family[1], "--lambda", "0.3"], None);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(field(&stdout(&o), "max_abs_error") < 1e-6);
    }
}

#[test]
fn glm_attack_no_intercept_needs_label() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reg.csv");
    let (_, y) = planted_csv(&path, 0.0);
    let p = path.to_str().unwrap();
    let o = reconlab(&["glm-attack", "--data", p, "--no-intercept"], None);
    assert_eq!(o.status.code(), Some(2));
    let label = y.to_string();
    let o = reconlab(&["glm-attack", "--data", p, "--no-intercept", "--label", &label], None);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("root+") && text.contains("root-"));
    let best = text
        .lines()
        .filter_map(|l| l.split("max_abs_error").nth(1))
        .map(|v| v.trim().parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(best < 1e-6);
}

fn sha(path: &Path) -> Vec<u8> {
    use sha2::{Digest, Sha256};
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

#[test]
fn train_released_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = reconlab(&["train-released"], Some(d.path()));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files: Vec<_> = std::fs::read_dir(a.path().join("released")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 3);
    for f in files {
        assert_eq!(sha(&a.path().join("released").join(&f)), sha(&b.path().join("released").join(&f)));
    }
    let (params, meta) = load_params(a.path().join("released/target_00000.params")).unwrap();
    assert_eq!(params.arch().describe(), "64-10-10:elu");
    assert!(meta.iter().any(|(k, v)| k == "config_hash" && v.len() == 16));
}

#[test]
fn train_released_single_target() {
    let d = tempfile::tempdir().unwrap();
    let o = reconlab(&["train-released", "--targets", "1"], Some(d.path()));
    assert!(o.status.success());
    assert_eq!(std::fs::read_dir(d.path().join("released")).unwrap().count(), 1);
}

#[test]
fn gen_shadows_validation_and_layers() {
    let d = tempfile::tempdir().unwrap();
    let o = reconlab(&["gen-shadows", "--k", "0"], Some(d.path()));
    assert_eq!(o.status.code(), Some(2));
    let o = reconlab(&["gen-shadows", "--k", "40", "--featurizer", "layers=1"], Some(d.path()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let set = ShadowSet::load(d.path().join("shadows.txt")).unwrap();
    assert_eq!((set.len(), set.feature_len(), set.target_dim()), (40, 110, 64));
    let header = std::fs::read_to_string(d.path().join("shadows.txt")).unwrap();
    assert!(header.contains("config_hash="));
}

#[test]
fn gen_shadows_ood_pool_is_relabeled() {
    let d = tempfile::tempdir().unwrap();
    let ood = synth_classification(&SynthSpec { dim: 64, classes: 10, n: 400, cluster_std: 0.2, seed: 77 }).unwrap();
    let path = d.path().join("ood.csv");
    write_csv(&ood, &path).unwrap();
    let o = reconlab(&["gen-shadows", "--k", "60", "--ood-pool", path.to_str().unwrap()], Some(d.path()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let set = ShadowSet::load(d.path().join("shadows.txt")).unwrap();
    let original = load_csv(&path, "label").unwrap();
    let mut changed = 0;
    for (t, &label) in set.targets.iter().zip(&set.labels) {
        let src = original.iter().find(|p| &p.x == t).expect("shadow target comes from the pool");
        changed += usize::from(src.y != label);
    }
    assert!(changed > 30, "{changed}/60 labels changed");
}

#[test]
fn attack_writes_one_row_per_target() {
    let d = tempfile::tempdir().unwrap();
    assert!(reconlab(&["train-released"], Some(d.path())).status.success());
    assert!(reconlab(&["gen-shadows"], Some(d.path())).status.success());
    let shadows = d.path().join("shadows.txt");
    let released = d.path().join("released");
    let o = reconlab(
        &["attack", "--shadows", shadows.to_str().unwrap(), "--released", released.to_str().unwrap()],
        Some(d.path()),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.path().join("attack.csv")).unwrap();
    assert!(csv.starts_with("# reconlab config_hash="));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3);
    let summary = std::fs::read_to_string(d.path().join("attack_summary.txt")).unwrap();
    assert!(field(&summary, "mean_mse") > 0.0);
    assert!(field(&summary, "oracle_threshold") > 0.0);

    // Loading persisted artifacts gives the same answer as training in place.
    let fresh = tempfile::tempdir().unwrap();
    assert!(reconlab(&["attack"], Some(fresh.path())).status.success());
    assert_eq!(
        std::fs::read_to_string(fresh.path().join("attack.csv")).unwrap(),
        csv
    );
}

#[test]
fn mia_trivial_and_coin() {
    let d = tempfile::tempdir().unwrap();
    let o = reconlab(&["mia", "--trials", "12"], Some(d.path()));
    assert!(o.status.success());
    assert!(stdout(&o).contains("accuracy 1.0000 over 12 trials"));
    let log = std::fs::read_to_string(d.path().join("mia_trials.csv")).unwrap();
    assert_eq!(log.lines().filter(|l| !l.starts_with('#')).count(), 13);
    let o = reconlab(&["mia", "--trials", "60", "--attack", "random"], Some(d.path()));
    let acc = field(&stdout(&o), "accuracy");
    assert!((0.25..=0.75).contains(&acc), "{acc}");
    let o = reconlab(&["mia", "--attack", "oracle"], Some(d.path()));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dp_sweep_rows_and_baseline() {
    let d = tempfile::tempdir().unwrap();
    let o = reconlab(&["dp-sweep"], Some(d.path()));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.path().join("dp_sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("inf,0,"));

    assert!(reconlab(&["attack"], Some(d.path())).status.success());
    let summary = std::fs::read_to_string(d.path().join("attack_summary.txt")).unwrap();
    let baseline: f64 = rows[0].split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(baseline, field(&summary, "mean_mse"));
}

#[test]
fn rero_check_passes() {
    let o = reconlab(&["rero-check", "--trials", "150"], None);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 28);
}

#[test]
fn exit_codes() {
    let o = Command::new(env!("CARGO_BIN_EXE_reconlab"))
        .env("RECONLAB_THREADS", "0")
        .args(["rero-bound", "--thm3", "--eps", "0", "--gamma", "0.5"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let d = tempfile::tempdir().unwrap();
    let o = reconlab(&["train-released", "--set", "model.learning_rate=1e300"], Some(d.path()));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("target 0"));
    let o = reconlab(&["train-released", "--set", "model.bogus=1"], Some(d.path()));
    assert_eq!(o.status.code(), Some(2));
    let o = reconlab(&["train-released", "--config", "/nonexistent.toml"], Some(d.path()));
    assert_eq!(o.status.code(), Some(2));
}
