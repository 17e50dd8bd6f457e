//! The informed membership game: a deterministic trainer is distinguished
//! perfectly by retraining, and per-example losses separate only when the
//! initialization is shared.

use reconlab::config::{ExperimentConfig, Profile};
use reconlab::experiment::prepare;
use reconlab::mia::{accuracy, loss_histogram, run_trials, trivial_deterministic_mia, Challenger};
use reconlab::nn::ModelParams;

fn main() -> reconlab::Result<()> {
    let mut cfg = ExperimentConfig::profile(Profile::DeskSynthetic);
    cfg.fixed_size = 200;
    let roles = prepare(&cfg)?;
    let (z0, z1) = (roles.targets.get(0).clone(), roles.targets.get(1).clone());

    let attack = |theta: &ModelParams, a: &_, b: &_| trivial_deterministic_mia(theta, &roles.fixed, &cfg.arch, &cfg.train, a, b);
    let trials = run_trials(&Challenger::deterministic(cfg.arch.clone(), cfg.train.clone()), &attack, &roles.fixed, &z0, &z1, 20, 5)?;
    let acc = accuracy(&trials);
    println!("trivial attack: {}/{} correct", acc.successes, acc.trials);

    for vary_init in [false, true] {
        let d = loss_histogram(&z0, &roles.fixed, &cfg.arch, &cfg.train, 20, vary_init, 6)?;
        println!(
            "vary_init={vary_init}: separable {}, overlap {:.3}, mean in {:.4}, mean out {:.4}",
            d.separable(),
            d.overlap(10),
            reconlab::stats::mean(&d.inside),
            reconlab::stats::mean(&d.outside)
        );
    }
    Ok(())
}
