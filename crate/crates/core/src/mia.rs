//! Informed membership inference.
//!
//! The adversary knows `D−` and two candidates `z0`, `z1`; the challenger
//! trains on `D− ∪ {z_b}` for a hidden bit `b` and the adversary guesses `b`
//! from the released model.

use std::io::Write;
use std::path::Path;

use rand::Rng as _;

use crate::data::{DataPoint, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::{train, FreshSeeds, MlpArchitecture, ModelParams, TrainConfig};
use crate::rng::Rng;
use crate::stats::{overlap_coefficient, wilson99, Proportion};

/// Distances closer than this cannot separate the candidates.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiaTrial {
    pub b: u8,
    pub guess: u8,
    pub correct: bool,
}

/// The training algorithm as the challenger runs it.
#[derive(Debug, Clone, PartialEq)]
pub struct Challenger {
    pub arch: MlpArchitecture,
    pub config: TrainConfig,
    /// Seeds drawn per trial and hidden from the adversary.
    pub fresh: FreshSeeds,
}

impl Challenger {
    pub fn deterministic(arch: MlpArchitecture, config: TrainConfig) -> Self {
        Self {
            arch,
            config,
            fresh: FreshSeeds::default(),
        }
    }
}

/// One round of the game. The attack receives the released model and the
/// two candidates and returns a bit.
pub fn informed_mia_protocol<M>(
    challenger: &Challenger,
    attack: &M,
    fixed: &LabeledDataset,
    z0: &DataPoint,
    z1: &DataPoint,
    trial_seed: u64,
) -> Result<MiaTrial>
where
    M: Fn(&ModelParams, &DataPoint, &DataPoint) -> Result<u8>,
{
    if z0 == z1 {
        return Err(Error::invalid("candidates must differ"));
    }
    let root = Rng::new(trial_seed);
    let b: u8 = root.named("bit").stream().random_range(0..2);
    let config = challenger.config.reseeded(challenger.fresh, root.named("mechanism").seed(), 0);
    let z = if b == 0 { z0 } else { z1 };
    let theta = train(&fixed.with_point(z)?, &challenger.arch, &config)?;
    let guess = attack(&theta, z0, z1)?;
    if guess > 1 {
        return Err(Error::invalid(format!("attack returned {guess}, not a bit")));
    }
    Ok(MiaTrial {
        b,
        guess,
        correct: b == guess,
    })
}

/// Runs `n_trials` rounds with per-trial seeds derived from `seed`.
pub fn run_trials<M>(
    challenger: &Challenger,
    attack: &M,
    fixed: &LabeledDataset,
    z0: &DataPoint,
    z1: &DataPoint,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<MiaTrial>>
where
    M: Fn(&ModelParams, &DataPoint, &DataPoint) -> Result<u8>,
{
    let root = Rng::new(seed).named("mia-trials");
    (0..n_trials)
        .map(|t| informed_mia_protocol(challenger, attack, fixed, z0, z1, root.child(t as u64).seed()))
        .collect()
}

pub fn accuracy(trials: &[MiaTrial]) -> Proportion {
    wilson99(trials.iter().filter(|t| t.correct).count() as u64, trials.len() as u64)
}

/// Retrains on both candidates with the adversary's belief about `T` and
/// picks the one whose model is closer to `theta` in ℓ2.
pub fn trivial_deterministic_mia(
    theta: &ModelParams,
    fixed: &LabeledDataset,
    arch: &MlpArchitecture,
    config: &TrainConfig,
    z0: &DataPoint,
    z1: &DataPoint,
) -> Result<u8> {
    let d0 = train(&fixed.with_point(z0)?, arch, config)?.l2_distance(theta);
    let d1 = train(&fixed.with_point(z1)?, arch, config)?.l2_distance(theta);
    if (d0 - d1).abs() < TIE_TOLERANCE {
        return Err(Error::Undecided(format!("candidate distances {d0} and {d1} tie")));
    }
    Ok(u8::from(d1 < d0))
}

/// Guess `0` if `ℓ(ẑ, z0) < ℓ(ẑ, z1)`, otherwise `1`.
pub fn mia_from_reconstruction<L>(z_hat: &[f64], z0: &[f64], z1: &[f64], ell: L) -> u8
where
    L: Fn(&[f64], &[f64]) -> f64,
{
    u8::from(ell(z_hat, z0) >= ell(z_hat, z1))
}

/// Single-example losses of `z` under models trained with and without it.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDistributions {
    pub inside: Vec<f64>,
    pub outside: Vec<f64>,
}

impl LossDistributions {
    /// Every inside loss lies strictly on one side of every outside loss.
    pub fn separable(&self) -> bool {
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        max(&self.inside) < min(&self.outside) || max(&self.outside) < min(&self.inside)
    }

    pub fn overlap(&self, bins: usize) -> f64 {
        overlap_coefficient(&self.inside, &self.outside, bins)
    }
}

/// Trains `n_models` models on `fixed ∪ {z}` and as many on `fixed`.
/// With `vary_init`, model `i` of each group uses an init seed derived from
/// `seed` and `i`; otherwise all share `config.init_seed`.
pub fn loss_histogram(
    z: &DataPoint,
    fixed: &LabeledDataset,
    arch: &MlpArchitecture,
    config: &TrainConfig,
    n_models: usize,
    vary_init: bool,
    seed: u64,
) -> Result<LossDistributions> {
    if n_models < 2 {
        return Err(Error::invalid("loss histograms need at least two models per side"));
    }
    let with = fixed.with_point(z)?;
    let fresh = FreshSeeds {
        init: vary_init,
        ..config_fresh(config)
    };
    let mut inside = Vec::with_capacity(n_models);
    let mut outside = Vec::with_capacity(n_models);
    for i in 0..n_models {
        let cfg = config.reseeded(fresh, seed, i as u64);
        inside.push(train(&with, arch, &cfg)?.example_loss(z)?);
        outside.push(train(fixed, arch, &cfg)?.example_loss(z)?);
    }
    Ok(LossDistributions { inside, outside })
}

fn config_fresh(config: &TrainConfig) -> FreshSeeds {
    FreshSeeds {
        noise: config.optimizer == crate::nn::Optimizer::DpGd,
        ..FreshSeeds::default()
    }
}

/// CSV trial log: `trial,b,guess,correct`.
pub fn write_trials(trials: &[MiaTrial], header_comment: Option<&str>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(c) = header_comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "trial,b,guess,correct")?;
    for (i, t) in trials.iter().enumerate() {
        writeln!(out, "{i},{},{},{}", t.b, t.guess, u8::from(t.correct))?;
    }
    out.flush()?;
    Ok(())
}
