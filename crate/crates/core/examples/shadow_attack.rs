//! Learned reconstruction on the desk-scale synthetic profile: train the
//! released models and shadow models once, then attack with white-box,
//! last-layer and black-box features.
//!
//! `cargo run --release --example shadow_attack -- [shadows]`

use std::time::Instant;

use reconlab::config::{ExperimentConfig, FeaturizerSpec, Profile};
use reconlab::experiment::{prepare, train_probe_classifier, Trained};

fn main() -> reconlab::Result<()> {
    let mut cfg = ExperimentConfig::profile(Profile::DeskSynthetic);
    if let Some(k) = std::env::args().nth(1) {
        cfg.set("split.shadows", &k)?;
    }
    let start = Instant::now();
    let roles = prepare(&cfg)?;
    let probe = train_probe_classifier(&cfg, &roles)?;
    let trained = Trained::new(&cfg, roles)?;
    println!("trained {} shadows and {} releases in {:.1?}", trained.shadow_models.len(), trained.released.len(), start.elapsed());

    for spec in [FeaturizerSpec::WhiteBox, FeaturizerSpec::Layers(vec![1]), FeaturizerSpec::BlackBox] {
        let t = Instant::now();
        let report = trained.attack(&spec, &cfg.reconn, Some(&probe))?;
        println!(
            "{:<10} mean mse {:.5} (se {:.5})  oracle {:.5}  kl {:.3}  per-target wins {:.2}  success {}  [{:.1?}]",
            report.featurizer,
            report.mean_mse,
            report.se_mse,
            report.threshold(),
            report.mean_kl(),
            report.success_rate(),
            report.success(),
            t.elapsed()
        );
    }
    Ok(())
}
