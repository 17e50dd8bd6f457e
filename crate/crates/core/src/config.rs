//! Experiment configuration: flat `key = value` files with `[section]`
//! headers, layered over a named profile.
//!
//! ```text
//! profile = desk-synthetic
//! [split]
//! shadows = 500
//! [model]
//! epochs = 30
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::accounting::Adjacency;
use crate::data::SynthSpec;
use crate::error::{Error, Result};
use crate::nn::{Activation, BatchSize, MlpArchitecture, Optimizer, TrainConfig};
use crate::persist::config_hash;
use crate::shadow::RecoNNConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    DeskSynthetic,
    DeskMnist14,
    FullMnist,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::DeskSynthetic => "desk-synthetic",
            Profile::DeskMnist14 => "desk-mnist14",
            Profile::FullMnist => "full-mnist",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "desk-synthetic" => Ok(Profile::DeskSynthetic),
            "desk-mnist14" => Ok(Profile::DeskMnist14),
            "full-mnist" => Ok(Profile::FullMnist),
            other => Err(Error::invalid(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SynthSpec),
    /// IDX image/label pair, block-mean downsampled by `downsample`.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        side: usize,
        downsample: usize,
    },
    Csv {
        path: PathBuf,
        label_column: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeaturizerSpec {
    WhiteBox,
    Layers(Vec<usize>),
    BlackBox,
}

impl FeaturizerSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "whitebox" => Ok(FeaturizerSpec::WhiteBox),
            "blackbox" => Ok(FeaturizerSpec::BlackBox),
            _ => match s.strip_prefix("layers=") {
                Some(list) => Ok(FeaturizerSpec::Layers(
                    list.split(',')
                        .map(|v| v.trim().parse().map_err(|_| Error::invalid(format!("bad layer index {v:?}"))))
                        .collect::<Result<_>>()?,
                )),
                None => Err(Error::invalid(format!("unknown featurizer {s:?}"))),
            },
        }
    }

    pub fn render(&self) -> String {
        match self {
            FeaturizerSpec::WhiteBox => "whitebox".into(),
            FeaturizerSpec::BlackBox => "blackbox".into(),
            FeaturizerSpec::Layers(l) => format!(
                "layers={}",
                l.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpSettings {
    pub clip: f64,
    pub delta: f64,
    /// Target ε per sweep row; `inf` means plain non-private training.
    pub epsilons: Vec<f64>,
    pub repeats: usize,
    /// Shadow count used inside the sweep.
    pub shadows: usize,
    pub adjacency: Adjacency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub data: DataSource,
    /// Optional out-of-distribution shadow pool, relabeled at random.
    pub ood_pool: Option<DataSource>,
    pub fixed_size: usize,
    pub shadows: usize,
    pub probes: usize,
    pub targets: usize,
    pub split_seed: u64,
    pub arch: MlpArchitecture,
    pub train: TrainConfig,
    pub random_init: bool,
    pub random_shuffle: bool,
    pub featurizer: FeaturizerSpec,
    pub reconn: RecoNNConfig,
    pub dp: DpSettings,
    /// Master seed for everything not covered by a named seed.
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn synthetic_source(dim: usize, classes: usize, n: usize, seed: u64) -> DataSource {
    DataSource::Synthetic(SynthSpec {
        dim,
        classes,
        n,
        cluster_std: 0.1,
        seed,
    })
}

impl ExperimentConfig {
    pub fn profile(profile: Profile) -> Self {
        let elu = |w: Vec<usize>| MlpArchitecture::new(w, Activation::Elu).expect("valid widths");
        let base = Self {
            profile,
            data: synthetic_source(64, 10, 2800, 1),
            ood_pool: None,
            fixed_size: 500,
            shadows: 2000,
            probes: 200,
            targets: 100,
            split_seed: 2,
            arch: elu(vec![64, 10, 10]),
            train: TrainConfig::gd(0.2, 0.9, 50, 7),
            random_init: false,
            random_shuffle: false,
            featurizer: FeaturizerSpec::WhiteBox,
            reconn: RecoNNConfig {
                seed: 3,
                ..RecoNNConfig::default()
            },
            dp: DpSettings {
                clip: 1.0,
                delta: 1e-5,
                epsilons: vec![f64::INFINITY, 1000.0, 100.0, 10.0],
                repeats: 3,
                shadows: 500,
                adjacency: Adjacency::Replace,
            },
            seed: 11,
            out_dir: PathBuf::from("out"),
        };
        let mnist = |side: usize, downsample: usize| DataSource::Idx {
            images: PathBuf::from("data/train-images-idx3-ubyte"),
            labels: PathBuf::from("data/train-labels-idx1-ubyte"),
            side,
            downsample,
        };
        match profile {
            Profile::DeskSynthetic => base,
            Profile::DeskMnist14 => Self {
                data: mnist(28, 2),
                fixed_size: 1000,
                shadows: 5000,
                arch: elu(vec![196, 10, 10]),
                ..base
            },
            Profile::FullMnist => Self {
                data: mnist(28, 1),
                fixed_size: 10_000,
                shadows: 48_800,
                targets: 1000,
                arch: elu(vec![784, 10, 10]),
                train: TrainConfig::gd(0.2, 0.9, 100, 7),
                reconn: RecoNNConfig {
                    width: Some(1000),
                    seed: 3,
                    ..RecoNNConfig::default()
                },
                dp: DpSettings {
                    shadows: 48_800,
                    ..base.dp
                },
                ..base
            },
        }
    }

    /// Total points the synthetic generator must produce.
    pub fn required_points(&self) -> usize {
        self.fixed_size + self.probes + self.shadows + self.targets
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.reconn.validate()?;
        let data_dim = match &self.data {
            DataSource::Synthetic(s) => {
                if s.n < self.required_points() {
                    return Err(Error::invalid(format!(
                        "synthetic n = {} is below the {} points the split needs",
                        s.n,
                        self.required_points()
                    )));
                }
                Some(s.dim)
            }
            DataSource::Idx { side, downsample, .. } => {
                if *downsample == 0 || side % downsample != 0 {
                    return Err(Error::invalid("downsample factor must divide the image side"));
                }
                Some((side / downsample) * (side / downsample))
            }
            DataSource::Csv { .. } => None,
        };
        if let Some(d) = data_dim {
            if d != self.arch.input_dim() {
                return Err(Error::invalid(format!(
                    "data dimension {d} differs from the model input width {}",
                    self.arch.input_dim()
                )));
            }
        }
        if self.featurizer == FeaturizerSpec::BlackBox && self.probes == 0 {
            return Err(Error::invalid("black-box featurizer needs probes > 0"));
        }
        if self.dp.epsilons.iter().any(|e| !(*e > 0.0)) || !(self.dp.clip > 0.0) || !(self.dp.delta > 0.0 && self.dp.delta < 1.0) {
            return Err(Error::invalid("dp needs ε > 0, clip > 0, δ in (0, 1)"));
        }
        Ok(())
    }

    /// Reads a config file over the profile it names (default
    /// `desk-synthetic`).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::format(path, m),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_entries(text)?;
        let profile = match entries.get("profile") {
            Some(p) => Profile::parse(p)?,
            None => Profile::DeskSynthetic,
        };
        let mut cfg = Self::profile(profile);
        let first = ["data.source", "model.arch"];
        for key in first {
            if let Some(value) = entries.get(key) {
                cfg.set(key, value)?;
            }
        }
        for (key, value) in &entries {
            if key != "profile" && !first.contains(&key.as_str()) {
                cfg.set(key, value)?;
            }
        }
        let side = cfg.probes + cfg.shadows;
        let (dim, classes) = (cfg.arch.input_dim(), cfg.arch.output_dim());
        if let Some(DataSource::Synthetic(s)) = &mut cfg.ood_pool {
            s.n = side;
            s.dim = dim;
            s.classes = classes;
        }
        let needed = cfg.required_points();
        if let DataSource::Synthetic(s) = &mut cfg.data {
            if !entries.contains_key("data.n") {
                s.n = s.n.max(needed);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one dotted key, e.g. `model.epochs`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let bad = || Error::invalid(format!("bad value {v:?} for {key}"));
        let uint = || v.parse::<usize>().map_err(|_| bad());
        let u64v = || v.parse::<u64>().map_err(|_| bad());
        let real = || v.parse::<f64>().map_err(|_| bad());
        let flag = || match v {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(bad()),
        };
        match key {
            "data.source" => {
                self.data = match v {
                    "synthetic" => synthetic_source(self.arch.input_dim(), self.arch.output_dim(), self.required_points(), 1),
                    "idx" => DataSource::Idx {
                        images: PathBuf::from("data/train-images-idx3-ubyte"),
                        labels: PathBuf::from("data/train-labels-idx1-ubyte"),
                        side: 28,
                        downsample: 1,
                    },
                    "csv" => DataSource::Csv {
                        path: PathBuf::from("data.csv"),
                        label_column: "label".into(),
                    },
                    _ => return Err(bad()),
                }
            }
            "data.dim" | "data.classes" | "data.n" | "data.cluster_std" | "data.seed" => match &mut self.data {
                DataSource::Synthetic(s) => match key {
                    "data.dim" => s.dim = uint()?,
                    "data.classes" => s.classes = uint()?,
                    "data.n" => s.n = uint()?,
                    "data.cluster_std" => s.cluster_std = real()?,
                    _ => s.seed = u64v()?,
                },
                _ => return Err(Error::invalid(format!("{key} applies to synthetic data only"))),
            },
            "data.images" | "data.labels" | "data.side" | "data.downsample" => match &mut self.data {
                DataSource::Idx {
                    images,
                    labels,
                    side,
                    downsample,
                } => match key {
                    "data.images" => *images = PathBuf::from(v),
                    "data.labels" => *labels = PathBuf::from(v),
                    "data.side" => *side = uint()?,
                    _ => *downsample = uint()?,
                },
                _ => return Err(Error::invalid(format!("{key} applies to idx data only"))),
            },
            "data.path" | "data.label_column" => match &mut self.data {
                DataSource::Csv { path, label_column } => {
                    if key == "data.path" {
                        *path = PathBuf::from(v)
                    } else {
                        *label_column = v.to_string()
                    }
                }
                _ => return Err(Error::invalid(format!("{key} applies to csv data only"))),
            },
            "data.ood_csv" => {
                self.ood_pool = Some(DataSource::Csv {
                    path: PathBuf::from(v),
                    label_column: "label".into(),
                })
            }
            "data.ood_synthetic_seed" => {
                let n = self.probes + self.shadows;
                self.ood_pool = Some(synthetic_source(self.arch.input_dim(), self.arch.output_dim(), n, u64v()?))
            }
            "split.fixed" => self.fixed_size = uint()?,
            "split.shadows" => self.shadows = uint()?,
            "split.probes" => self.probes = uint()?,
            "split.targets" => self.targets = uint()?,
            "split.seed" => self.split_seed = u64v()?,
            "model.arch" => self.arch = MlpArchitecture::parse(v)?,
            "model.optimizer" => self.train.optimizer = Optimizer::parse(v)?,
            "model.learning_rate" => self.train.learning_rate = real()?,
            "model.momentum" => self.train.momentum = real()?,
            "model.epochs" => self.train.epochs = uint()?,
            "model.batch_size" => {
                self.train.batch_size = if v == "full" { BatchSize::Full } else { BatchSize::Size(uint()?) }
            }
            "model.clip" => self.train.clip_norm = Some(real()?),
            "model.noise_multiplier" => self.train.noise_multiplier = Some(real()?),
            "model.init_seed" => self.train.init_seed = u64v()?,
            "model.shuffle_seed" => self.train.shuffle_seed = u64v()?,
            "model.noise_seed" => self.train.noise_seed = u64v()?,
            "model.random_init" => self.random_init = flag()?,
            "model.random_shuffle" => self.random_shuffle = flag()?,
            "attack.featurizer" => self.featurizer = FeaturizerSpec::parse(v)?,
            "attack.hidden_layers" => self.reconn.hidden_layers = uint()?,
            "attack.width" => self.reconn.width = if v == "auto" { None } else { Some(uint()?) },
            "attack.learning_rate" => self.reconn.learning_rate = real()?,
            "attack.batch_size" => self.reconn.batch_size = uint()?,
            "attack.epochs" => self.reconn.epochs = uint()?,
            "attack.seed" => self.reconn.seed = u64v()?,
            "dp.clip" => self.dp.clip = real()?,
            "dp.delta" => self.dp.delta = real()?,
            "dp.epsilons" => {
                self.dp.epsilons = v
                    .split(',')
                    .map(|e| match e.trim() {
                        "inf" => Ok(f64::INFINITY),
                        x => x.parse().map_err(|_| bad()),
                    })
                    .collect::<Result<_>>()?
            }
            "dp.repeats" => self.dp.repeats = uint()?,
            "dp.shadows" => self.dp.shadows = uint()?,
            "dp.adjacency" => self.dp.adjacency = Adjacency::parse(v)?,
            "run.seed" => self.seed = u64v()?,
            "output.dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::invalid(format!("unknown key {key}"))),
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, "profile = {}", self.profile.name());
        let _ = writeln!(w, "[data]");
        match &self.data {
            DataSource::Synthetic(d) => {
                let _ = writeln!(w, "source = synthetic");
                let _ = writeln!(w, "dim = {}\nclasses = {}\nn = {}\ncluster_std = {}\nseed = {}", d.dim, d.classes, d.n, d.cluster_std, d.seed);
            }
            DataSource::Idx {
                images,
                labels,
                side,
                downsample,
            } => {
                let _ = writeln!(w, "source = idx");
                let _ = writeln!(
                    w,
                    "images = {}\nlabels = {}\nside = {side}\ndownsample = {downsample}",
                    images.display(),
                    labels.display()
                );
            }
            DataSource::Csv { path, label_column } => {
                let _ = writeln!(w, "source = csv\npath = {}\nlabel_column = {label_column}", path.display());
            }
        }
        match &self.ood_pool {
            Some(DataSource::Csv { path, .. }) => {
                let _ = writeln!(w, "ood_csv = {}", path.display());
            }
            Some(DataSource::Synthetic(d)) => {
                let _ = writeln!(w, "ood_synthetic_seed = {}", d.seed);
            }
            _ => {}
        }
        let _ = writeln!(
            w,
            "[split]\nfixed = {}\nshadows = {}\nprobes = {}\ntargets = {}\nseed = {}",
            self.fixed_size, self.shadows, self.probes, self.targets, self.split_seed
        );
        let t = &self.train;
        let _ = writeln!(w, "[model]\narch = {}\noptimizer = {}", self.arch.describe(), t.optimizer.name());
        let _ = writeln!(w, "learning_rate = {}\nmomentum = {}\nepochs = {}", t.learning_rate, t.momentum, t.epochs);
        let _ = writeln!(
            w,
            "batch_size = {}",
            match t.batch_size {
                BatchSize::Full => "full".to_string(),
                BatchSize::Size(b) => b.to_string(),
            }
        );
        if let Some(c) = t.clip_norm {
            let _ = writeln!(w, "clip = {c}");
        }
        if let Some(n) = t.noise_multiplier {
            let _ = writeln!(w, "noise_multiplier = {n}");
        }
        let _ = writeln!(
            w,
            "init_seed = {}\nshuffle_seed = {}\nnoise_seed = {}\nrandom_init = {}\nrandom_shuffle = {}",
            t.init_seed, t.shuffle_seed, t.noise_seed, self.random_init, self.random_shuffle
        );
        let r = &self.reconn;
        let _ = writeln!(
            w,
            "[attack]\nfeaturizer = {}\nhidden_layers = {}\nwidth = {}\nlearning_rate = {}\nbatch_size = {}\nepochs = {}\nseed = {}",
            self.featurizer.render(),
            r.hidden_layers,
            r.width.map_or("auto".into(), |x| x.to_string()),
            r.learning_rate,
            r.batch_size,
            r.epochs,
            r.seed
        );
        let eps: Vec<String> = self
            .dp
            .epsilons
            .iter()
            .map(|e| if e.is_infinite() { "inf".into() } else { e.to_string() })
            .collect();
        let _ = writeln!(
            w,
            "[dp]\nclip = {}\ndelta = {}\nepsilons = {}\nrepeats = {}\nshadows = {}\nadjacency = {}",
            self.dp.clip,
            self.dp.delta,
            eps.join(","),
            self.dp.repeats,
            self.dp.shadows,
            match self.dp.adjacency {
                Adjacency::Replace => "replace",
                Adjacency::AddRemove => "add_remove",
            }
        );
        let _ = writeln!(w, "[run]\nseed = {}", self.seed);
        let _ = writeln!(w, "[output]\ndir = {}", self.out_dir.display());
        s
    }

    /// Provenance hash of the canonical rendering.
    /// Hash of everything that affects results; the output directory is
    /// left out so reruns elsewhere compare equal.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        config_hash(&c.render())
    }
}

/// `section.key → value`; top-level keys have no prefix.
fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", n + 1)))?;
        let key = if section.is_empty() {
            k.trim().to_string()
        } else {
            format!("{section}.{}", k.trim())
        };
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::invalid(format!("line {}: duplicate key {key}", n + 1)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        for p in [Profile::DeskSynthetic, Profile::DeskMnist14, Profile::FullMnist] {
            let cfg = ExperimentConfig::profile(p);
            let back = ExperimentConfig::parse(&cfg.render()).unwrap();
            assert_eq!(back, cfg, "{}", p.name());
            assert_eq!(back.hash(), cfg.hash());
        }
    }

    #[test]
    fn overrides_and_errors() {
        let cfg = ExperimentConfig::parse("[split]\nshadows = 300 # fewer\n[model]\nepochs = 5\n").unwrap();
        assert_eq!(cfg.shadows, 300);
        assert_eq!(cfg.train.epochs, 5);
        assert_ne!(cfg.hash(), ExperimentConfig::profile(Profile::DeskSynthetic).hash());
        assert!(ExperimentConfig::parse("[model]\nepochz = 5\n").is_err());
        assert!(ExperimentConfig::parse("[model]\nepochs = 5\nepochs = 6\n").is_err());
        assert!(ExperimentConfig::parse("[model]\narch = 32-10-10:elu\n").is_err());
        assert!(ExperimentConfig::parse("[attack]\nfeaturizer = layers=1\n").unwrap().featurizer == FeaturizerSpec::Layers(vec![1]));
    }

    #[test]
    fn desk_synthetic_defaults() {
        let cfg = ExperimentConfig::profile(Profile::DeskSynthetic);
        assert_eq!(cfg.arch.parameter_count(), 760);
        assert_eq!(cfg.required_points(), 2800);
        cfg.validate().unwrap();
    }
}
