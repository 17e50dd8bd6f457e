//! Reconstruction error and released-model accuracy under DP-GD at a range
//! of privacy budgets.
//!
//! `cargo run --release --example dp_sweep`

use reconlab::config::{ExperimentConfig, Profile};
use reconlab::experiment::{dp_sweep, monotonicity_violations};

fn main() -> reconlab::Result<()> {
    let cfg = ExperimentConfig::profile(Profile::DeskSynthetic);
    let rows = dp_sweep(&cfg)?;
    println!("{:>10} {:>8} {:>10} {:>10} {:>9} {:>9}", "target ε", "σ", "mean mse", "se", "accuracy", "oracle");
    for r in &rows {
        println!(
            "{:>10} {:>8.3} {:>10.5} {:>10.5} {:>9.3} {:>9.5}",
            r.target_epsilon, r.noise_multiplier, r.mean_mse, r.se_mse, r.test_accuracy, r.threshold
        );
    }
    let bad = monotonicity_violations(&rows);
    println!("monotone within 2 se: {}", bad.is_empty());
    Ok(())
}
