//! The training algorithm: GD/SGD with classical momentum and full-batch
//! DP-GD. Every run is a pure function of (dataset order, architecture,
//! config); all sums are accumulated in dataset order on one thread.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::{init_params, MlpArchitecture, ModelParams, Workspace};
use crate::data::{DataPoint, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Optimizer {
    GdMomentum,
    SgdMomentum,
    DpGd,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::GdMomentum => "gd_momentum",
            Optimizer::SgdMomentum => "sgd_momentum",
            Optimizer::DpGd => "dp_gd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gd_momentum" | "gd" => Ok(Optimizer::GdMomentum),
            "sgd_momentum" | "sgd" => Ok(Optimizer::SgdMomentum),
            "dp_gd" | "dpgd" => Ok(Optimizer::DpGd),
            other => Err(Error::invalid(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatchSize {
    Full,
    Size(usize),
}

/// Seeds a mechanism draws anew on every run, hidden from the adversary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FreshSeeds {
    pub init: bool,
    pub shuffle: bool,
    pub noise: bool,
}

impl FreshSeeds {
    /// Only the DP noise is secret.
    pub const NOISE: Self = Self {
        init: false,
        shuffle: false,
        noise: true,
    };
}

/// Hyper-parameters and seeds of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub clip_norm: Option<f64>,
    pub noise_multiplier: Option<f64>,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub noise_seed: u64,
}

impl TrainConfig {
    /// Full-batch GD with momentum.
    pub fn gd(learning_rate: f64, momentum: f64, epochs: usize, init_seed: u64) -> Self {
        Self {
            optimizer: Optimizer::GdMomentum,
            learning_rate,
            momentum,
            epochs,
            batch_size: BatchSize::Full,
            clip_norm: None,
            noise_multiplier: None,
            init_seed,
            shuffle_seed: 0,
            noise_seed: 0,
        }
    }

    /// Mini-batch SGD with momentum and seeded per-epoch shuffling.
    pub fn sgd(learning_rate: f64, momentum: f64, epochs: usize, batch_size: usize, init_seed: u64, shuffle_seed: u64) -> Self {
        Self {
            optimizer: Optimizer::SgdMomentum,
            batch_size: BatchSize::Size(batch_size),
            shuffle_seed,
            ..Self::gd(learning_rate, momentum, epochs, init_seed)
        }
    }

    /// Turns this config into full-batch DP-GD with the same schedule.
    pub fn with_dp(&self, clip_norm: f64, noise_multiplier: f64, noise_seed: u64) -> Self {
        Self {
            optimizer: Optimizer::DpGd,
            batch_size: BatchSize::Full,
            clip_norm: Some(clip_norm),
            noise_multiplier: Some(noise_multiplier),
            noise_seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if let BatchSize::Size(0) = self.batch_size {
            return Err(Error::invalid("batch_size must be positive"));
        }
        if self.optimizer == Optimizer::DpGd {
            match (self.clip_norm, self.noise_multiplier) {
                (Some(c), Some(s)) if c > 0.0 && s >= 0.0 && s.is_finite() => {}
                _ => {
                    return Err(Error::invalid(
                        "DP-GD needs clip_norm > 0 and a finite noise_multiplier >= 0",
                    ))
                }
            }
        }
        Ok(())
    }

    /// Copy with the seeds flagged in `fresh` replaced by children of
    /// `seed` labelled `index`.
    pub fn reseeded(&self, fresh: FreshSeeds, seed: u64, index: u64) -> Self {
        let root = Rng::new(seed);
        let mut out = self.clone();
        if fresh.init {
            out.init_seed = root.named("fresh-init").child(index).seed();
        }
        if fresh.shuffle {
            out.shuffle_seed = root.named("fresh-shuffle").child(index).seed();
        }
        if fresh.noise {
            out.noise_seed = root.named("fresh-noise").child(index).seed();
        }
        out
    }

    /// Number of optimizer steps taken on a dataset of `n` points.
    pub fn steps(&self, n: usize) -> usize {
        match (self.optimizer, self.batch_size) {
            (Optimizer::SgdMomentum, BatchSize::Size(b)) if b < n => self.epochs * n.div_ceil(b),
            _ => self.epochs,
        }
    }

    /// One-line `key=value` rendering, stable across runs.
    pub fn describe(&self) -> String {
        let batch = match self.batch_size {
            BatchSize::Full => "full".to_string(),
            BatchSize::Size(b) => b.to_string(),
        };
        format!(
            "optimizer={} lr={} momentum={} epochs={} batch={} clip={} noise={} init_seed={} shuffle_seed={} noise_seed={}",
            self.optimizer.name(),
            self.learning_rate,
            self.momentum,
            self.epochs,
            batch,
            self.clip_norm.map_or("-".into(), |c| c.to_string()),
            self.noise_multiplier.map_or("-".into(), |s| s.to_string()),
            self.init_seed,
            self.shuffle_seed,
            self.noise_seed
        )
    }
}

fn check_dataset(dataset: &LabeledDataset, arch: &MlpArchitecture) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if dataset.dim() != arch.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            actual: dataset.dim(),
        });
    }
    if dataset.iter().any(|p| p.y >= arch.output_dim()) {
        return Err(Error::invalid("label exceeds the model's output width"));
    }
    Ok(())
}

fn momentum_step(params: &mut ModelParams, velocity: &mut [f64], grad: &[f64], lr: f64, mu: f64, step: usize) -> Result<()> {
    for ((p, v), g) in params.as_mut_slice().iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = mu * *v + g;
        *p -= lr * *v;
    }
    if !params.is_finite() {
        return Err(Error::Divergence(format!("non-finite parameters after step {step}")));
    }
    Ok(())
}

/// Sum of per-example gradients over `batch` into `grad` (zeroed first).
fn batch_gradient_sum(params: &ModelParams, batch: &[&DataPoint], ws: &mut Workspace, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    batch.iter().map(|p| params.example_grad_into(p, ws, grad)).sum()
}

/// Runs the configured optimizer from `init_params(arch, init_seed)`.
pub fn train(dataset: &LabeledDataset, arch: &MlpArchitecture, config: &TrainConfig) -> Result<ModelParams> {
    config.validate()?;
    if config.optimizer == Optimizer::DpGd {
        return train_dp(dataset, arch, config);
    }
    check_dataset(dataset, arch)?;
    let mut params = init_params(arch, config.init_seed);
    let mut velocity = vec![0.0; params.parameter_count()];
    let mut grad = vec![0.0; params.parameter_count()];
    let mut ws = Workspace::new(arch);
    let points: Vec<&DataPoint> = dataset.iter().collect();
    let n = points.len();

    let batch = match (config.optimizer, config.batch_size) {
        (Optimizer::SgdMomentum, BatchSize::Size(b)) if b < n => b,
        _ => n,
    };
    let shuffle = Rng::new(config.shuffle_seed).named("shuffle");
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0;
    for epoch in 0..config.epochs {
        if batch < n {
            order = (0..n).collect();
            order.shuffle(&mut shuffle.child(epoch as u64).stream());
        }
        for chunk in order.chunks(batch) {
            let members: Vec<&DataPoint> = chunk.iter().map(|&i| points[i]).collect();
            let loss = batch_gradient_sum(&params, &members, &mut ws, &mut grad);
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("non-finite loss at step {step}")));
            }
            let m = members.len() as f64;
            grad.iter_mut().for_each(|g| *g /= m);
            momentum_step(&mut params, &mut velocity, &grad, config.learning_rate, config.momentum, step)?;
            step += 1;
        }
    }
    Ok(params)
}

/// Scales `g` so that its ℓ2 norm is at most `clip`; returns the norm
/// before clipping.
pub fn clip_in_place(g: &mut [f64], clip: f64) -> f64 {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > clip {
        let scale = clip / norm;
        g.iter_mut().for_each(|v| *v *= scale);
    }
    norm
}

/// Full-batch DP-GD: per-example clipping to `clip_norm`, sum, Gaussian
/// noise of std `noise_multiplier * clip_norm`, divide by `n`, momentum.
pub fn train_dp(dataset: &LabeledDataset, arch: &MlpArchitecture, config: &TrainConfig) -> Result<ModelParams> {
    config.validate()?;
    let (clip, sigma) = match (config.optimizer, config.clip_norm, config.noise_multiplier) {
        (Optimizer::DpGd, Some(c), Some(s)) => (c, s),
        _ => return Err(Error::invalid("train_dp needs a DP-GD config")),
    };
    check_dataset(dataset, arch)?;
    let mut params = init_params(arch, config.init_seed);
    let len = params.parameter_count();
    let mut velocity = vec![0.0; len];
    let mut sum = vec![0.0; len];
    let mut single = vec![0.0; len];
    let mut ws = Workspace::new(arch);
    let n = dataset.len() as f64;
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma * clip).expect("finite std"));
    let noise_root = Rng::new(config.noise_seed).named("dp-noise");

    for step in 0..config.epochs {
        sum.iter_mut().for_each(|g| *g = 0.0);
        for p in dataset.iter() {
            single.iter_mut().for_each(|g| *g = 0.0);
            let loss = params.example_grad_into(p, &mut ws, &mut single);
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("non-finite loss at step {step}")));
            }
            clip_in_place(&mut single, clip);
            for (s, g) in sum.iter_mut().zip(&single) {
                *s += g;
            }
        }
        if let Some(noise) = &noise {
            let mut stream = noise_root.child(step as u64).stream();
            for s in sum.iter_mut() {
                *s += noise.sample(&mut stream);
            }
        }
        sum.iter_mut().for_each(|g| *g /= n);
        momentum_step(&mut params, &mut velocity, &sum, config.learning_rate, config.momentum, step)?;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_classification, SynthSpec};
    use crate::nn::Activation;
    use proptest::prelude::*;

    fn blobs(n: usize, classes: usize, std: f64, seed: u64) -> LabeledDataset {
        synth_classification(&SynthSpec {
            dim: 8,
            classes,
            n,
            cluster_std: std,
            seed,
        })
        .unwrap()
    }

    fn small_arch() -> MlpArchitecture {
        MlpArchitecture::new(vec![8, 6, 3], Activation::Elu).unwrap()
    }

    #[test]
    fn zero_epochs_or_zero_lr_returns_init() {
        let ds = blobs(30, 3, 0.1, 1);
        let arch = small_arch();
        let init = init_params(&arch, 5);
        assert_eq!(train(&ds, &arch, &TrainConfig::gd(0.2, 0.9, 0, 5)).unwrap(), init);
        assert_eq!(train(&ds, &arch, &TrainConfig::gd(0.0, 0.9, 10, 5)).unwrap(), init);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let ds = blobs(40, 3, 0.1, 2);
        let arch = small_arch();
        for cfg in [
            TrainConfig::gd(0.2, 0.9, 20, 1),
            TrainConfig::sgd(0.1, 0.9, 5, 7, 1, 99),
            TrainConfig::gd(0.2, 0.9, 10, 1).with_dp(1.0, 1.0, 3),
        ] {
            let a = train(&ds, &arch, &cfg).unwrap();
            let b = train(&ds, &arch, &cfg).unwrap();
            assert_eq!(a.as_slice(), b.as_slice());
        }
    }

    #[test]
    fn shuffle_seed_matters_only_for_minibatches() {
        let ds = blobs(40, 3, 0.1, 2);
        let arch = small_arch();
        let a = train(&ds, &arch, &TrainConfig::sgd(0.1, 0.9, 3, 8, 1, 1)).unwrap();
        let b = train(&ds, &arch, &TrainConfig::sgd(0.1, 0.9, 3, 8, 1, 2)).unwrap();
        assert_ne!(a, b);
        let full_a = train(&ds, &arch, &TrainConfig { shuffle_seed: 1, ..TrainConfig::gd(0.1, 0.9, 3, 1) }).unwrap();
        let full_b = train(&ds, &arch, &TrainConfig { shuffle_seed: 2, ..TrainConfig::gd(0.1, 0.9, 3, 1) }).unwrap();
        assert_eq!(full_a, full_b);
    }

    #[test]
    fn separable_blobs_are_learned() {
        // Two well separated blobs; pinned: full-batch GD reaches 100% in 100 epochs.
        let ds = blobs(200, 2, 0.05, 4);
        let arch = MlpArchitecture::new(vec![8, 6, 2], Activation::Elu).unwrap();
        let p = train(&ds, &arch, &TrainConfig::gd(0.2, 0.9, 100, 1)).unwrap();
        assert!(p.accuracy(ds.points()) >= 0.99);
    }

    #[test]
    fn dp_without_noise_and_clipping_matches_plain_gd() {
        let ds = blobs(30, 3, 0.1, 6);
        let arch = small_arch();
        let base = TrainConfig::gd(0.2, 0.9, 15, 3);
        let plain = train(&ds, &arch, &base).unwrap();

        let huge = train(&ds, &arch, &base.with_dp(1e9, 0.0, 1)).unwrap();
        for (a, b) in plain.as_slice().iter().zip(huge.as_slice()) {
            assert!((a - b).abs() <= 1e-9);
        }
        // Same summation order, factor exactly 1: bitwise equal.
        assert_eq!(plain.as_slice(), huge.as_slice());
    }

    #[test]
    fn dp_noise_moves_the_model() {
        let ds = blobs(30, 3, 0.1, 6);
        let arch = small_arch();
        let base = TrainConfig::gd(0.2, 0.9, 10, 3);
        let quiet = train(&ds, &arch, &base.with_dp(1.0, 0.0, 1)).unwrap();
        let noisy = train(&ds, &arch, &base.with_dp(1.0, 10.0, 1)).unwrap();
        assert!(quiet.l2_distance(&noisy) > 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let ds = blobs(10, 3, 0.1, 1);
        let arch = small_arch();
        let mut cfg = TrainConfig::gd(0.1, 0.9, 1, 1);
        cfg.optimizer = Optimizer::DpGd;
        assert!(train(&ds, &arch, &cfg).is_err());
        assert!(train(&ds, &arch, &TrainConfig::gd(0.1, 1.0, 1, 1)).is_err());
        assert!(train(&LabeledDataset::new(8, 3), &arch, &TrainConfig::gd(0.1, 0.5, 1, 1)).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let ds = blobs(20, 3, 0.1, 1);
        let arch = small_arch();
        let err = train(&ds, &arch, &TrainConfig::gd(1e300, 0.0, 5, 1)).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)), "{err:?}");
    }

    proptest! {
        #[test]
        fn clipping_bounds_the_norm(v in proptest::collection::vec(-1e3f64..1e3, 1..40), c in 1e-3f64..10.0) {
            let mut g = v.clone();
            clip_in_place(&mut g, c);
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm <= c + 1e-12);
        }
    }
}
