//! End-to-end pipelines shared by the command-line tool, the examples and
//! the acceptance tests.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::accounting::{calibrate_noise, dpgd_epsilon};
use crate::config::{DataSource, ExperimentConfig, FeaturizerSpec};
use crate::data::{downsample_images, load_csv, load_idx, relabel_random, split, synth_classification, LabeledDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{judge_success, kl_probe, mse, oracle_report, OracleReport};
use crate::nn::{train, Activation, FreshSeeds, MlpArchitecture, ModelParams, TrainConfig};
use crate::rng::Rng;
use crate::shadow::{attack, train_reconn, train_shadow_models, Featurizer, RecoNNConfig, ShadowOptions, ShadowSet};
use crate::stats::{mean, std_error};

/// The data roles of one experiment.
#[derive(Debug, Clone)]
pub struct Roles {
    /// `D−`, known to the adversary.
    pub fixed: LabeledDataset,
    /// Black-box probe inputs, taken from the front of the shadow pool.
    pub probes: LabeledDataset,
    /// Shadow targets `z̄_i`.
    pub pool: LabeledDataset,
    /// Test targets `z`.
    pub targets: LabeledDataset,
}

impl Roles {
    /// Everything the adversary holds: `D− ∪ D̄`.
    pub fn adversary_points(&self) -> Vec<&[f64]> {
        self.fixed
            .iter()
            .chain(self.probes.iter())
            .chain(self.pool.iter())
            .map(|p| p.x.as_slice())
            .collect()
    }
}

pub fn load_source(source: &DataSource) -> Result<LabeledDataset> {
    match source {
        DataSource::Synthetic(spec) => synth_classification(spec),
        DataSource::Idx {
            images,
            labels,
            side,
            downsample,
        } => {
            let full = load_idx(images, labels)?;
            if *downsample == 1 {
                Ok(full)
            } else {
                downsample_images(&full, *side, *side, *downsample)
            }
        }
        DataSource::Csv { path, label_column } => load_csv(path, label_column),
    }
}

/// Splits the configured data into fixed set, probes, shadow pool and
/// targets. An OOD pool replaces the in-distribution shadow split and gets
/// random labels.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Roles> {
    cfg.validate()?;
    let data = load_source(&cfg.data)?;
    if data.dim() != cfg.arch.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.arch.input_dim(),
            actual: data.dim(),
        });
    }
    let side = cfg.probes + cfg.shadows;
    let parts = split(
        &data,
        &SplitSpec {
            fixed_size: cfg.fixed_size,
            shadow_size: if cfg.ood_pool.is_some() { 0 } else { side },
            test_target_size: cfg.targets,
            split_seed: cfg.split_seed,
        },
    )?;
    let shadow = match &cfg.ood_pool {
        None => parts.shadow,
        Some(src) => {
            let ood = load_source(src)?;
            if ood.dim() != data.dim() {
                return Err(Error::DimensionMismatch {
                    expected: data.dim(),
                    actual: ood.dim(),
                });
            }
            if ood.len() < side {
                return Err(Error::invalid(format!("OOD pool has {} points, {side} needed", ood.len())));
            }
            let idx: Vec<usize> = (0..side).collect();
            relabel_random(&ood.subset(&idx), cfg.arch.output_dim(), Rng::new(cfg.seed).named("ood-labels").seed())?
        }
    };
    let (probes, pool) = shadow.split_at(cfg.probes);
    Ok(Roles {
        fixed: parts.fixed,
        probes,
        pool,
        targets: parts.targets,
    })
}

/// Seeds a release draws privately.
fn release_fresh(cfg: &ExperimentConfig, config: &TrainConfig) -> FreshSeeds {
    FreshSeeds {
        init: cfg.random_init,
        shuffle: cfg.random_shuffle,
        noise: config.optimizer == crate::nn::Optimizer::DpGd,
    }
}

/// Training config of the model released for target `index`.
pub fn release_config(cfg: &ExperimentConfig, config: &TrainConfig, index: usize) -> TrainConfig {
    config.reseeded(release_fresh(cfg, config), Rng::new(cfg.seed).named("release").seed(), index as u64)
}

pub fn shadow_options(cfg: &ExperimentConfig) -> ShadowOptions {
    ShadowOptions {
        random_init: cfg.random_init,
        random_shuffle: cfg.random_shuffle,
        parallel: true,
    }
}

/// `θ_i = T(D− ∪ {z_i})` for every test target, in target order.
pub fn train_released(cfg: &ExperimentConfig, config: &TrainConfig, roles: &Roles) -> Result<Vec<ModelParams>> {
    let results: Vec<Result<ModelParams>> = roles
        .targets
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            train(&roles.fixed.with_point(z)?, &cfg.arch, &release_config(cfg, config, i)).map_err(|e| Error::TargetFailed {
                index: i,
                source: Box::new(e),
            })
        })
        .collect();
    results.into_iter().collect()
}

pub fn build_featurizer(spec: &FeaturizerSpec, roles: &Roles) -> Featurizer {
    match spec {
        FeaturizerSpec::WhiteBox => Featurizer::WhiteBoxFlatten,
        FeaturizerSpec::Layers(l) => Featurizer::LayerSubset(l.clone()),
        FeaturizerSpec::BlackBox => Featurizer::BlackBoxLogits(roles.probes.clone()),
    }
}

/// Classifier used for the KL probe, trained on the shadow pool (disjoint
/// from the fixed set and the targets).
pub fn train_probe_classifier(cfg: &ExperimentConfig, roles: &Roles) -> Result<ModelParams> {
    let arch = MlpArchitecture::new(vec![cfg.arch.input_dim(), 32, cfg.arch.output_dim()], Activation::Elu)?;
    let n = roles.pool.len().min(2000);
    let idx: Vec<usize> = (0..n).collect();
    let config = TrainConfig::gd(0.2, 0.9, 150, Rng::new(cfg.seed).named("probe-classifier").seed());
    train(&roles.pool.subset(&idx), &arch, &config)
}

/// Result for one test target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetResult {
    pub index: usize,
    pub mse: f64,
    pub nn_distance: f64,
    pub kl: f64,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct AttackReport {
    pub featurizer: String,
    pub rows: Vec<TargetResult>,
    pub reconstructions: Vec<Vec<f64>>,
    pub mean_mse: f64,
    pub se_mse: f64,
    pub oracle: OracleReport,
    pub reconn_final_loss: f64,
}

impl AttackReport {
    pub fn threshold(&self) -> f64 {
        self.oracle.threshold()
    }

    /// Mean attack MSE below the mean nearest-neighbour distance.
    pub fn success(&self) -> bool {
        judge_success(self.mean_mse, self.threshold())
    }

    pub fn success_rate(&self) -> f64 {
        self.rows.iter().filter(|r| r.success).count() as f64 / self.rows.len().max(1) as f64
    }

    pub fn mean_kl(&self) -> f64 {
        mean(&self.rows.iter().map(|r| r.kl).collect::<Vec<_>>())
    }

    /// `index,mse,nn_distance,kl,success` per target.
    pub fn write_csv(&self, path: impl AsRef<Path>, provenance: &str) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# {provenance}")?;
        writeln!(out, "target,mse,nn_distance,kl,success")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.index, r.mse, r.nn_distance, r.kl, u8::from(r.success))?;
        }
        out.flush()?;
        Ok(())
    }

    /// `key = value` summary.
    pub fn write_summary(&self, path: impl AsRef<Path>, provenance: &str) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "# {provenance}")?;
        writeln!(out, "featurizer = {}", self.featurizer)?;
        writeln!(out, "targets = {}", self.rows.len())?;
        writeln!(out, "mean_mse = {}", self.mean_mse)?;
        writeln!(out, "se_mse = {}", self.se_mse)?;
        writeln!(out, "oracle_threshold = {}", self.threshold())?;
        writeln!(out, "oracle_p1 = {}", self.oracle.p1)?;
        writeln!(out, "oracle_p10 = {}", self.oracle.p10)?;
        writeln!(out, "oracle_p50 = {}", self.oracle.p50)?;
        writeln!(out, "mean_kl = {}", self.mean_kl())?;
        writeln!(out, "per_target_success_rate = {}", self.success_rate())?;
        writeln!(out, "success = {}", self.success())?;
        out.flush()?;
        Ok(())
    }
}

/// Attacks every released model and compares with the oracle.
pub fn evaluate(
    set: &ShadowSet,
    reconn: &RecoNNConfig,
    featurizer: &Featurizer,
    released: &[ModelParams],
    roles: &Roles,
    probe_classifier: Option<&ModelParams>,
) -> Result<AttackReport> {
    let (phi, report) = train_reconn(set, reconn)?;
    let oracle = oracle_report(&roles.targets.features(), &roles.adversary_points())?;
    let mut rows = Vec::with_capacity(released.len());
    let mut reconstructions = Vec::with_capacity(released.len());
    for (i, (theta, z)) in released.iter().zip(roles.targets.iter()).enumerate() {
        let z_hat = attack(&phi, theta, featurizer)?;
        let m = mse(&z.x, &z_hat)?;
        let kl = match probe_classifier {
            Some(p) => kl_probe(p, &z.x, &z_hat)?,
            None => f64::NAN,
        };
        rows.push(TargetResult {
            index: i,
            mse: m,
            nn_distance: oracle.nn_distance[i],
            kl,
            success: judge_success(m, oracle.nn_distance[i]),
        });
        reconstructions.push(z_hat);
    }
    let mses: Vec<f64> = rows.iter().map(|r| r.mse).collect();
    Ok(AttackReport {
        featurizer: featurizer.describe(),
        mean_mse: mean(&mses),
        se_mse: std_error(&mses),
        rows,
        reconstructions,
        oracle,
        reconn_final_loss: report.final_loss(),
    })
}

/// Trained shadow and released models for one training setup, reusable
/// across featurizers.
#[derive(Debug, Clone)]
pub struct Trained {
    pub roles: Roles,
    pub shadow_models: Vec<ModelParams>,
    pub released: Vec<ModelParams>,
}

impl Trained {
    pub fn new(cfg: &ExperimentConfig, roles: Roles) -> Result<Self> {
        Self::with_config(cfg, &cfg.train, roles)
    }

    pub fn with_config(cfg: &ExperimentConfig, config: &TrainConfig, roles: Roles) -> Result<Self> {
        let shadow_models = train_shadow_models(&roles.fixed, &roles.pool, &cfg.arch, config, &shadow_options(cfg))?;
        let released = train_released(cfg, config, &roles)?;
        Ok(Self {
            roles,
            shadow_models,
            released,
        })
    }

    pub fn shadow_set(&self, featurizer: &Featurizer) -> Result<ShadowSet> {
        ShadowSet::from_models(&self.shadow_models, &self.roles.pool, featurizer)
    }

    pub fn attack(&self, spec: &FeaturizerSpec, reconn: &RecoNNConfig, probe_classifier: Option<&ModelParams>) -> Result<AttackReport> {
        let featurizer = build_featurizer(spec, &self.roles);
        let set = self.shadow_set(&featurizer)?;
        evaluate(&set, reconn, &featurizer, &self.released, &self.roles, probe_classifier)
    }
}

/// Prepare, train, attack with the configured featurizer.
pub fn run_attack(cfg: &ExperimentConfig) -> Result<AttackReport> {
    let roles = prepare(cfg)?;
    let probe = train_probe_classifier(cfg, &roles)?;
    let trained = Trained::new(cfg, roles)?;
    trained.attack(&cfg.featurizer, &cfg.reconn, Some(&probe))
}

/// One row of the DP sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DpRow {
    /// Requested ε (`inf` for non-private training).
    pub target_epsilon: f64,
    pub noise_multiplier: f64,
    /// ε actually achieved at the configured δ.
    pub epsilon: f64,
    pub mse: Vec<f64>,
    pub mean_mse: f64,
    pub se_mse: f64,
    pub test_accuracy: f64,
    pub threshold: f64,
}

/// Trains releases and shadows at each ε, attacks them, and records the
/// reconstruction error and released-model accuracy. The `inf` row uses the
/// non-private trainer. Every repeat draws its own DP noise and, after the
/// first, its own reconstructor seed.
pub fn dp_sweep(cfg: &ExperimentConfig) -> Result<Vec<DpRow>> {
    let full = prepare(cfg)?;
    let k = cfg.dp.shadows.min(full.pool.len());
    let idx: Vec<usize> = (0..k).collect();
    let roles = Roles {
        pool: full.pool.subset(&idx),
        ..full.clone()
    };
    let eval_points: Vec<_> = full.pool.points().iter().take(1000).cloned().collect();
    let steps = cfg.train.epochs;
    let featurizer = build_featurizer(&cfg.featurizer, &roles);
    let mut rows = Vec::new();
    for &eps in &cfg.dp.epsilons {
        let sigma = if eps.is_infinite() {
            0.0
        } else {
            calibrate_noise(eps, cfg.dp.delta, steps, cfg.dp.clip, cfg.dp.adjacency)?
        };
        let mut mses = Vec::new();
        let mut accs = Vec::new();
        let mut threshold = f64::NAN;
        let mut shared: Option<Trained> = None;
        for r in 0..cfg.dp.repeats.max(1) {
            let rep = Rng::new(cfg.seed).named("dp-repeat").child(r as u64);
            let config = if eps.is_infinite() {
                cfg.train.clone()
            } else {
                cfg.train.with_dp(cfg.dp.clip, sigma, rep.named("noise").seed())
            };
            // Non-private training is deterministic, so its models are
            // identical across repeats.
            let trained = match (&shared, eps.is_infinite()) {
                (Some(t), true) => t.clone(),
                _ => Trained::with_config(cfg, &config, roles.clone())?,
            };
            // The first repeat keeps the configured reconstructor seed so the
            // `inf` row matches a plain attack run.
            let reconn = RecoNNConfig {
                seed: if r == 0 { cfg.reconn.seed } else { rep.named("reconn").seed() },
                ..cfg.reconn.clone()
            };
            let set = trained.shadow_set(&featurizer)?;
            let report = evaluate(&set, &reconn, &featurizer, &trained.released, &trained.roles, None)?;
            threshold = report.threshold();
            mses.push(report.mean_mse);
            accs.push(mean(&trained.released.iter().map(|m| m.accuracy(&eval_points)).collect::<Vec<_>>()));
            if eps.is_infinite() {
                shared = Some(trained);
            }
        }
        rows.push(DpRow {
            target_epsilon: eps,
            noise_multiplier: sigma,
            epsilon: if eps.is_infinite() {
                f64::INFINITY
            } else {
                dpgd_epsilon(steps, cfg.dp.clip, sigma, cfg.dp.delta, cfg.dp.adjacency)?
            },
            mean_mse: mean(&mses),
            se_mse: if mses.len() > 1 { std_error(&mses) } else { 0.0 },
            mse: mses,
            test_accuracy: mean(&accs),
            threshold,
        });
    }
    Ok(rows)
}

/// `target_epsilon,noise_multiplier,epsilon,mean_mse,se_mse,test_accuracy,threshold`.
pub fn write_dp_rows(rows: &[DpRow], path: impl AsRef<Path>, provenance: &str) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# {provenance}")?;
    writeln!(out, "target_epsilon,noise_multiplier,epsilon,mean_mse,se_mse,test_accuracy,threshold")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.target_epsilon, r.noise_multiplier, r.epsilon, r.mean_mse, r.se_mse, r.test_accuracy, r.threshold
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Indices `(i, j)` where row `j > i` falls below row `i` by more than
/// `2·√(se_i² + se_j²)`.
pub fn monotonicity_violations(rows: &[DpRow]) -> Vec<(usize, usize)> {
    let mut bad = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let tol = 2.0 * (rows[i].se_mse.powi(2) + rows[j].se_mse.powi(2)).sqrt();
            if rows[j].mean_mse < rows[i].mean_mse - tol {
                bad.push((i, j));
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Profile;

    fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::profile(Profile::DeskSynthetic);
        for (k, v) in [
            ("data.dim", "8"),
            ("data.classes", "3"),
            ("model.arch", "8-4-3:elu"),
            ("split.fixed", "20"),
            ("split.shadows", "40"),
            ("split.probes", "5"),
            ("split.targets", "4"),
            ("model.epochs", "5"),
            ("attack.batch_size", "16"),
            ("attack.epochs", "3"),
            ("dp.shadows", "20"),
            ("dp.repeats", "2"),
        ] {
            cfg.set(k, v).unwrap();
        }
        let needed = cfg.required_points();
        if let DataSource::Synthetic(s) = &mut cfg.data {
            s.n = needed;
        }
        cfg
    }

    #[test]
    fn roles_are_disjoint_and_sized() {
        let cfg = tiny();
        let r = prepare(&cfg).unwrap();
        assert_eq!((r.fixed.len(), r.probes.len(), r.pool.len(), r.targets.len()), (20, 5, 40, 4));
        assert_eq!(r.adversary_points().len(), 65);
        for t in r.targets.iter() {
            assert!(r.fixed.iter().chain(r.pool.iter()).all(|p| p != t));
        }
    }

    #[test]
    fn ood_pool_is_relabeled() {
        let mut cfg = tiny();
        cfg.set("data.ood_synthetic_seed", "99").unwrap();
        let a = prepare(&cfg).unwrap();
        let b = prepare(&cfg).unwrap();
        assert_eq!(a.pool.points(), b.pool.points());
        let in_dist = prepare(&tiny()).unwrap();
        assert_ne!(a.pool.get(0).x, in_dist.pool.get(0).x);
    }

    #[test]
    fn pipeline_runs_and_is_reproducible() {
        let cfg = tiny();
        let a = run_attack(&cfg).unwrap();
        let b = run_attack(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 4);
        assert!(a.threshold() > 0.0);
    }

    #[test]
    fn dp_sweep_rows() {
        let mut cfg = tiny();
        cfg.set("dp.epsilons", "inf,10").unwrap();
        let rows = dp_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].noise_multiplier, 0.0);
        assert_eq!(rows[0].mse[0], rows[0].mse[0]);
        assert!(rows[1].noise_multiplier > 0.0);
        assert!((rows[1].epsilon - 10.0).abs() < 1e-5);
    }

    #[test]
    fn monotonicity_check() {
        let row = |m: f64, se: f64| DpRow {
            target_epsilon: 1.0,
            noise_multiplier: 1.0,
            epsilon: 1.0,
            mse: vec![],
            mean_mse: m,
            se_mse: se,
            test_accuracy: 1.0,
            threshold: 1.0,
        };
        assert!(monotonicity_violations(&[row(0.1, 0.01), row(0.09, 0.01), row(0.3, 0.0)]).is_empty());
        assert_eq!(monotonicity_violations(&[row(0.1, 0.001), row(0.05, 0.001)]), vec![(0, 1)]);
    }
}
