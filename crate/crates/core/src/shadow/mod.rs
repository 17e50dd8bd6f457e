//! Shadow models, featurization and the learned reconstructor attack.

mod reconn;

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{DataPoint, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::{train, FreshSeeds, MlpArchitecture, ModelParams, Optimizer, TrainConfig};

pub use reconn::{attack, run_protocol, train_reconn, RecoNN, RecoNNConfig, RecoNNReport};

/// Standard deviations below this are treated as 1.
pub const DEGENERATE_STD: f64 = 1e-12;

/// How a model is turned into the attack's input vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Featurizer {
    /// Every parameter in canonical layer order.
    WhiteBoxFlatten,
    /// Parameters of the listed layers only, in the listed order.
    LayerSubset(Vec<usize>),
    /// Logits on each probe point, concatenated in probe order.
    BlackBoxLogits(LabeledDataset),
}

impl Featurizer {
    pub fn validate(&self, arch: &MlpArchitecture) -> Result<()> {
        match self {
            Featurizer::WhiteBoxFlatten => Ok(()),
            Featurizer::LayerSubset(layers) => {
                if layers.is_empty() {
                    return Err(Error::invalid("layer subset is empty"));
                }
                match layers.iter().find(|&&l| l >= arch.num_layers()) {
                    Some(l) => Err(Error::invalid(format!(
                        "layer {l} out of range for {} layers",
                        arch.num_layers()
                    ))),
                    None => Ok(()),
                }
            }
            Featurizer::BlackBoxLogits(probes) => {
                if probes.is_empty() {
                    return Err(Error::Empty("black-box probe set".into()));
                }
                if probes.dim() != arch.input_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: arch.input_dim(),
                        actual: probes.dim(),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn feature_len(&self, arch: &MlpArchitecture) -> usize {
        match self {
            Featurizer::WhiteBoxFlatten => arch.parameter_count(),
            Featurizer::LayerSubset(layers) => {
                let shapes = arch.layers();
                layers.iter().map(|&l| shapes[l].param_count()).sum()
            }
            Featurizer::BlackBoxLogits(probes) => probes.len() * arch.output_dim(),
        }
    }

    /// Short descriptor, e.g. `whitebox`, `layers=1`, `blackbox=200`.
    pub fn describe(&self) -> String {
        match self {
            Featurizer::WhiteBoxFlatten => "whitebox".into(),
            Featurizer::LayerSubset(layers) => format!(
                "layers={}",
                layers.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
            ),
            Featurizer::BlackBoxLogits(probes) => format!("blackbox={}", probes.len()),
        }
    }
}

impl fmt::Display for Featurizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Feature vector of `model` under `featurizer`.
pub fn featurize(model: &ModelParams, featurizer: &Featurizer) -> Result<Vec<f64>> {
    featurizer.validate(model.arch())?;
    Ok(match featurizer {
        Featurizer::WhiteBoxFlatten => model.as_slice().to_vec(),
        Featurizer::LayerSubset(layers) => layers.iter().flat_map(|&l| model.layer_slice(l).to_vec()).collect(),
        Featurizer::BlackBoxLogits(probes) => {
            let mut out = Vec::with_capacity(probes.len() * model.arch().output_dim());
            for p in probes.iter() {
                out.extend(model.forward(&p.x)?);
            }
            out
        }
    })
}

/// Per-coordinate standardization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population mean and std over `rows`.
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::Empty("normalization statistics need rows".into()))?;
        let len = first.as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; len];
        for r in rows {
            let r = r.as_ref();
            if r.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    actual: r.len(),
                });
            }
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; len];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd < DEGENERATE_STD {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(v.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect())
    }

    pub fn invert(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(v.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| x * s + m).collect())
    }
}

/// `(v − mean) / std` coordinatewise.
pub fn apply_norm(v: &[f64], stats: &NormStats) -> Result<Vec<f64>> {
    stats.apply(v)
}

/// The attack's training data: featurized shadow models paired with the
/// shadow targets they were trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowSet {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    /// Labels the shadow targets were trained with.
    pub labels: Vec<usize>,
    pub featurizer: String,
    /// `None` for an empty set.
    pub stats: Option<NormStats>,
}

impl ShadowSet {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, labels: Vec<usize>, featurizer: String) -> Result<Self> {
        if features.len() != targets.len() || features.len() != labels.len() {
            return Err(Error::invalid("features, targets and labels must have equal counts"));
        }
        if let Some(f) = features.first() {
            if let Some(bad) = features.iter().find(|r| r.len() != f.len()) {
                return Err(Error::DimensionMismatch {
                    expected: f.len(),
                    actual: bad.len(),
                });
            }
        }
        if let Some(t) = targets.first() {
            if let Some(bad) = targets.iter().find(|r| r.len() != t.len()) {
                return Err(Error::DimensionMismatch {
                    expected: t.len(),
                    actual: bad.len(),
                });
            }
        }
        if targets.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("shadow targets must lie in [0, 1]"));
        }
        let stats = if features.is_empty() {
            None
        } else {
            Some(NormStats::fit(&features)?)
        };
        Ok(Self {
            features,
            targets,
            labels,
            featurizer,
            stats,
        })
    }

    /// Pairs already-trained shadow models with their targets.
    pub fn from_models(models: &[ModelParams], targets: &LabeledDataset, featurizer: &Featurizer) -> Result<Self> {
        if models.len() != targets.len() {
            return Err(Error::invalid("one shadow model per target"));
        }
        let features = models.iter().map(|m| featurize(m, featurizer)).collect::<Result<Vec<_>>>()?;
        Self::new(
            features,
            targets.iter().map(|p| p.x.clone()).collect(),
            targets.iter().map(|p| p.y).collect(),
            featurizer.describe(),
        )
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn target_dim(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    pub fn stats(&self) -> Result<&NormStats> {
        self.stats
            .as_ref()
            .ok_or_else(|| Error::Empty("shadow set has no normalization statistics".into()))
    }

    /// Normalized feature rows.
    pub fn normalized_features(&self) -> Result<Vec<Vec<f64>>> {
        let stats = self.stats()?;
        self.features.iter().map(|f| stats.apply(f)).collect()
    }

    /// Keeps the pairs at `indices`; statistics are refitted.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.features[i].clone()).collect(),
            indices.iter().map(|&i| self.targets[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.featurizer.clone(),
        )
    }

    fn matrix_path(header: &Path) -> PathBuf {
        let mut p = header.as_os_str().to_owned();
        p.push(".bin");
        PathBuf::from(p)
    }

    /// Writes a text header at `path` and the pair matrix next to it at
    /// `path.bin` (little-endian f64, one row per pair, feature ‖ target).
    pub fn save(&self, path: impl AsRef<Path>, provenance: Option<&str>) -> Result<()> {
        let path = path.as_ref();
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut h = BufWriter::new(std::fs::File::create(path)?);
        if let Some(p) = provenance {
            writeln!(h, "# {p}")?;
        }
        writeln!(h, "format=reconlab-shadowset-1")?;
        writeln!(h, "featurizer={}", self.featurizer)?;
        writeln!(h, "pairs={}", self.len())?;
        writeln!(h, "feature_len={}", self.feature_len())?;
        writeln!(h, "target_dim={}", self.target_dim())?;
        writeln!(
            h,
            "labels={}",
            self.labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
        )?;
        if let Some(s) = &self.stats {
            writeln!(h, "mean={}", join(&s.mean))?;
            writeln!(h, "std={}", join(&s.std))?;
        }
        h.flush()?;

        let mut m = BufWriter::new(std::fs::File::create(Self::matrix_path(path))?);
        for (f, t) in self.features.iter().zip(&self.targets) {
            for v in f.iter().chain(t) {
                m.write_all(&v.to_le_bytes())?;
            }
        }
        m.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |msg: String| Error::format(path, msg);
        let mut fields = std::collections::HashMap::new();
        for line in BufReader::new(std::fs::File::open(path)?).lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| bad(format!("missing {k}")));
        if get("format")? != "reconlab-shadowset-1" {
            return Err(bad("unknown format".into()));
        }
        let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(format!("bad {k}"))) };
        let (pairs, flen, tdim) = (num("pairs")?, num("feature_len")?, num("target_dim")?);
        let labels: Vec<usize> = if pairs == 0 {
            Vec::new()
        } else {
            get("labels")?
                .split(',')
                .map(|s| s.parse().map_err(|_| bad("bad label".into())))
                .collect::<Result<_>>()?
        };
        if labels.len() != pairs {
            return Err(bad("label count differs from pair count".into()));
        }

        let mut bytes = Vec::new();
        std::fs::File::open(Self::matrix_path(path))?.read_to_end(&mut bytes)?;
        let row = flen + tdim;
        if bytes.len() != pairs * row * 8 {
            return Err(bad(format!("matrix holds {} bytes, expected {}", bytes.len(), pairs * row * 8)));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let mut features = Vec::with_capacity(pairs);
        let mut targets = Vec::with_capacity(pairs);
        for r in values.chunks_exact(row.max(1)).take(pairs) {
            features.push(r[..flen].to_vec());
            targets.push(r[flen..].to_vec());
        }
        let set = Self::new(features, targets, labels, get("featurizer")?.clone())?;
        Ok(set)
    }
}

/// Options for [`gen_shadows`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShadowOptions {
    /// Per-shadow init seeds instead of the shared one.
    pub random_init: bool,
    /// Per-shadow shuffle seeds (the adversary does not know the release's).
    pub random_shuffle: bool,
    pub parallel: bool,
}

impl Default for ShadowOptions {
    fn default() -> Self {
        Self {
            random_init: false,
            random_shuffle: false,
            parallel: true,
        }
    }
}

impl ShadowOptions {
    /// Seeds each shadow draws for itself. DP noise is always private.
    pub fn fresh(&self, config: &TrainConfig) -> FreshSeeds {
        FreshSeeds {
            init: self.random_init,
            shuffle: self.random_shuffle,
            noise: config.optimizer == Optimizer::DpGd,
        }
    }
}

/// Training config of shadow `index`.
pub fn shadow_config(config: &TrainConfig, options: &ShadowOptions, index: usize) -> TrainConfig {
    config.reseeded(options.fresh(config), config.init_seed ^ 0x5ad0_5ad0, index as u64)
}

/// Trains `T(fixed ∪ {z̄_i})` for every `z̄_i` in `pool`, in pool order.
pub fn train_shadow_models(
    fixed: &LabeledDataset,
    pool: &LabeledDataset,
    arch: &MlpArchitecture,
    config: &TrainConfig,
    options: &ShadowOptions,
) -> Result<Vec<ModelParams>> {
    config.validate()?;
    let one = |(i, z): (usize, &DataPoint)| -> Result<ModelParams> {
        let wrap = |e: Error| Error::ShadowFailed {
            index: i,
            source: Box::new(e),
        };
        let data = fixed.with_point(z).map_err(wrap)?;
        train(&data, arch, &shadow_config(config, options, i)).map_err(wrap)
    };
    if options.parallel {
        let results: Vec<Result<ModelParams>> = pool.points().par_iter().enumerate().map(one).collect();
        results.into_iter().collect()
    } else {
        pool.iter().enumerate().map(one).collect()
    }
}

/// Shadow models featurized and paired with their targets.
pub fn gen_shadows(
    fixed: &LabeledDataset,
    pool: &LabeledDataset,
    arch: &MlpArchitecture,
    config: &TrainConfig,
    featurizer: &Featurizer,
    options: &ShadowOptions,
) -> Result<ShadowSet> {
    featurizer.validate(arch)?;
    let models = train_shadow_models(fixed, pool, arch, config, options)?;
    ShadowSet::from_models(&models, pool, featurizer)
}
