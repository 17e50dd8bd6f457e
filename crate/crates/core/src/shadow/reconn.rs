use rand::seq::SliceRandom;

use super::{featurize, Featurizer, NormStats, ShadowSet};
use crate::data::{DataPoint, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::{init_params, sigmoid, train, Activation, MlpArchitecture, ModelParams, TrainConfig, Workspace};
use crate::rng::Rng;

/// Reconstructor network hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoNNConfig {
    pub hidden_layers: usize,
    /// `None` picks `max(64, 4·√feature_len)`.
    pub width: Option<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// RMSProp squared-gradient decay.
    pub decay: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for RecoNNConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 2,
            width: None,
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 100,
            decay: 0.9,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl RecoNNConfig {
    pub fn hidden_width(&self, feature_len: usize) -> usize {
        self.width
            .unwrap_or_else(|| 64usize.max((4.0 * (feature_len as f64).sqrt()).round() as usize))
    }

    pub fn architecture(&self, feature_len: usize, target_dim: usize) -> Result<MlpArchitecture> {
        let w = self.hidden_width(feature_len);
        let mut widths = vec![feature_len];
        widths.extend(std::iter::repeat_n(w, self.hidden_layers));
        widths.push(target_dim);
        MlpArchitecture::new(widths, Activation::Relu)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || !(0.0..1.0).contains(&self.decay) || !(self.epsilon > 0.0) {
            return Err(Error::invalid("reconstructor needs lr > 0, batch > 0, decay in [0, 1), eps > 0"));
        }
        Ok(())
    }
}

/// A trained reconstructor together with the normalization it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoNN {
    pub net: ModelParams,
    pub stats: NormStats,
    pub featurizer: String,
}

/// Mean loss after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoNNReport {
    pub epoch_loss: Vec<f64>,
}

impl RecoNNReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_loss.last().copied().unwrap_or(f64::NAN)
    }
}

impl RecoNN {
    /// Reconstruction from an already normalized feature vector.
    pub fn predict_normalized(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.net.forward(features)?.into_iter().map(sigmoid).collect())
    }

    /// Reconstruction from a raw feature vector.
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.predict_normalized(&self.stats.apply(features)?)
    }
}

/// MAE + MSE of `s` against `t`; writes `dL/ds` into `ds`.
fn loss_grad(s: &[f64], t: &[f64], ds: &mut [f64]) -> f64 {
    let d = s.len() as f64;
    let mut loss = 0.0;
    for ((g, &a), &b) in ds.iter_mut().zip(s).zip(t) {
        let r = a - b;
        loss += r.abs() + r * r;
        *g = (r.signum() * f64::from(r != 0.0) + 2.0 * r) / d;
    }
    loss / d
}

/// Trains the reconstructor with RMSProp on MAE + MSE. Hidden layers use
/// ReLU; a sigmoid maps the output into `[0, 1]`.
pub fn train_reconn(set: &ShadowSet, config: &RecoNNConfig) -> Result<(RecoNN, RecoNNReport)> {
    config.validate()?;
    if set.len() < config.batch_size {
        return Err(Error::invalid(format!(
            "shadow set of {} pairs is smaller than the batch size {}",
            set.len(),
            config.batch_size
        )));
    }
    let stats = set.stats()?.clone();
    let inputs = set.normalized_features()?;
    let arch = config.architecture(set.feature_len(), set.target_dim())?;
    let root = Rng::new(config.seed);
    let mut net = init_params(&arch, root.named("reconn-init").seed());
    let len = net.parameter_count();
    let mut grad = vec![0.0; len];
    let mut sq = vec![0.0; len];
    let mut ws = Workspace::new(&arch);
    let mut ds = vec![0.0; set.target_dim()];
    let mut dz = vec![0.0; set.target_dim()];
    let mut order: Vec<usize> = (0..set.len()).collect();
    let shuffle = root.named("reconn-shuffle");
    let mut epoch_loss = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle.child(epoch as u64).stream());
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                net.forward_ws(&inputs[i], &mut ws);
                let s: Vec<f64> = ws.output().iter().map(|&z| sigmoid(z)).collect();
                total += loss_grad(&s, &set.targets[i], &mut ds);
                for ((g, d), sv) in dz.iter_mut().zip(&ds).zip(&s) {
                    *g = d * sv * (1.0 - sv);
                }
                net.backward_ws(&inputs[i], &mut ws, &dz, &mut grad);
            }
            let m = batch.len() as f64;
            for ((p, g), v) in net.as_mut_slice().iter_mut().zip(&grad).zip(sq.iter_mut()) {
                let g = g / m;
                *v = config.decay * *v + (1.0 - config.decay) * g * g;
                *p -= config.learning_rate * g / (v.sqrt() + config.epsilon);
            }
        }
        let mean = total / set.len() as f64;
        if !mean.is_finite() || !net.is_finite() {
            return Err(Error::Divergence(format!("reconstructor diverged in epoch {epoch}")));
        }
        epoch_loss.push(mean);
    }
    Ok((
        RecoNN {
            net,
            stats,
            featurizer: set.featurizer.clone(),
        },
        RecoNNReport { epoch_loss },
    ))
}

/// `ẑ = φ(featurize(θ))`.
pub fn attack(phi: &RecoNN, released: &ModelParams, featurizer: &Featurizer) -> Result<Vec<f64>> {
    if featurizer.describe() != phi.featurizer {
        return Err(Error::invalid(format!(
            "reconstructor was trained on {} features, not {}",
            phi.featurizer,
            featurizer.describe()
        )));
    }
    phi.predict(&featurize(released, featurizer)?)
}

/// One run of the informed reconstruction game: train on `fixed ∪ {z}`,
/// reconstruct, score with `ell`.
pub fn run_protocol<R, L>(
    arch: &MlpArchitecture,
    config: &TrainConfig,
    reconstruct: R,
    fixed: &LabeledDataset,
    z: &DataPoint,
    ell: L,
) -> Result<f64>
where
    R: Fn(&ModelParams) -> Result<Vec<f64>>,
    L: Fn(&[f64], &[f64]) -> Result<f64>,
{
    let theta = train(&fixed.with_point(z)?, arch, config)?;
    let z_hat = reconstruct(&theta)?;
    ell(&z.x, &z_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mse;

    fn toy_set(n: usize) -> ShadowSet {
        let mut s = Rng::new(3).stream();
        use rand::Rng as _;
        let features: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| s.random::<f64>()).collect()).collect();
        let targets: Vec<Vec<f64>> = features.iter().map(|f| f[..4].iter().map(|v| 0.2 + 0.6 * v).collect()).collect();
        ShadowSet::new(features, targets, vec![0; n], "whitebox".into()).unwrap()
    }

    fn quick() -> RecoNNConfig {
        RecoNNConfig {
            width: Some(32),
            learning_rate: 3e-3,
            batch_size: 16,
            epochs: 150,
            seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn width_rule() {
        let c = RecoNNConfig::default();
        assert_eq!(c.hidden_width(100), 64);
        assert_eq!(c.hidden_width(760), 110);
        assert_eq!(c.architecture(760, 64).unwrap().widths(), &[760, 110, 110, 64]);
    }

    #[test]
    fn memorizes_a_repeated_pair() {
        let one = toy_set(1);
        let rep = one.subset(&[0; 16]).unwrap();
        let cfg = RecoNNConfig {
            epochs: 600,
            learning_rate: 1e-3,
            ..quick()
        };
        let (phi, report) = train_reconn(&rep, &cfg).unwrap();
        // RMSProp on an absolute-error term hovers at a step-size floor.
        assert!(report.final_loss() < 0.01 * report.epoch_loss[0], "{:?}", &report.epoch_loss[590..]);
        let z = phi.predict(&rep.features[0]).unwrap();
        assert!(mse(&z, &rep.targets[0]).unwrap() < 1e-5);
    }

    #[test]
    fn deterministic_and_memorizes() {
        let set = toy_set(64);
        let (a, ra) = train_reconn(&set, &quick()).unwrap();
        let (b, rb) = train_reconn(&set, &quick()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        let train_mse: f64 = (0..set.len())
            .map(|i| mse(&a.predict(&set.features[i]).unwrap(), &set.targets[i]).unwrap())
            .sum::<f64>()
            / set.len() as f64;
        let mut pair = 0.0;
        let mut count = 0.0;
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                pair += mse(&set.targets[i], &set.targets[j]).unwrap();
                count += 1.0;
            }
        }
        assert!(train_mse <= 0.1 * pair / count, "{train_mse} vs {}", pair / count);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let s = [0.3, 0.7, 0.55];
        let t = [0.1, 0.9, 0.5];
        let mut ds = [0.0; 3];
        loss_grad(&s, &t, &mut ds);
        let h = 1e-6;
        for k in 0..3 {
            let mut up = s;
            let mut dn = s;
            up[k] += h;
            dn[k] -= h;
            let mut tmp = [0.0; 3];
            let fd = (loss_grad(&up, &t, &mut tmp) - loss_grad(&dn, &t, &mut tmp)) / (2.0 * h);
            assert!((fd - ds[k]).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_small_sets_and_wrong_featurizer() {
        let set = toy_set(8);
        assert!(train_reconn(&set, &RecoNNConfig::default()).is_err());
    }

    #[test]
    fn protocol_arithmetic() {
        let arch = MlpArchitecture::new(vec![2, 2], Activation::Identity).unwrap();
        let fixed = LabeledDataset::from_points(vec![DataPoint::new(vec![0.0, 1.0], 0)], 2, 2).unwrap();
        let z = DataPoint::new(vec![1.0, 1.0], 1);
        let cfg = TrainConfig::gd(0.1, 0.0, 2, 1);
        let exact = run_protocol(&arch, &cfg, |_| Ok(z.x.clone()), &fixed, &z, mse).unwrap();
        assert_eq!(exact, 0.0);
        let gray = run_protocol(&arch, &cfg, |_| Ok(vec![0.5, 0.5]), &fixed, &z, mse).unwrap();
        assert_eq!(gray, 0.25);
    }
}
