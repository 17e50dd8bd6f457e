//! Trains the released-model MLP with each optimizer and reports accuracy,
//! the loss of a held-out point and how many gradient entries it zeroes.

use reconlab::data::{split, synth_classification, SplitSpec, SynthSpec};
use reconlab::nn::{train, MlpArchitecture, TrainConfig};

fn main() -> reconlab::Result<()> {
    let data = synth_classification(&SynthSpec { dim: 64, classes: 10, n: 1200, cluster_std: 0.1, seed: 1 })?;
    let parts = split(&data, &SplitSpec { fixed_size: 500, shadow_size: 600, test_target_size: 100, split_seed: 2 })?;
    let arch = MlpArchitecture::parse("64-10-10:elu")?;
    let configs = [
        TrainConfig::gd(0.2, 0.9, 50, 7),
        TrainConfig::sgd(0.05, 0.9, 20, 64, 7, 8),
        TrainConfig::gd(0.2, 0.9, 50, 7).with_dp(1.0, 2.0, 9),
    ];
    let z = parts.targets.get(0);
    for config in configs {
        let model = train(&parts.fixed, &arch, &config)?;
        let zeros = model.zero_grad_fraction(z)?;
        println!(
            "{:<40}\n    shadow acc {:.3}  loss(z) {:.4}  zero-grad fraction per layer {:?}",
            config.describe(),
            model.accuracy(parts.shadow.points()),
            model.example_loss(z)?,
            zeros.iter().map(|f| (f * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }
    let relu = MlpArchitecture::parse("64-10-10:relu")?;
    let model = train(&parts.fixed, &relu, &TrainConfig::gd(0.2, 0.9, 50, 7))?;
    println!("relu zero-grad fraction per layer {:?}", model.zero_grad_fraction(z)?);
    Ok(())
}
