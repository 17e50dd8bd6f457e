//! Small multilayer perceptrons: initialization, forward pass,
//! cross-entropy backpropagation and the training loops in [`train`].
//!
//! Parameters live in one flat `Vec<f64>` laid out layer by layer, each
//! layer as its row-major `out × in` weight matrix followed by its bias.
//! That flat vector is also the canonical white-box feature view of a
//! model.

pub mod train;

use rand_distr::{Distribution, Normal};

use crate::data::DataPoint;
use crate::error::{Error, Result};
use crate::rng::Rng;

pub use train::{train, train_dp, BatchSize, FreshSeeds, Optimizer, TrainConfig};

/// Hidden-layer nonlinearity. The output layer is always affine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Elu,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Softplus,
    Identity,
}

const LEAKY_SLOPE: f64 = 0.01;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            Activation::Identity => z,
        }
    }

    /// Exact derivative at the pre-activation `z`. ReLU uses 0 at the kink.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Softplus => sigmoid(z),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Elu => "elu",
            Activation::Relu => "relu",
            Activation::LeakyRelu => "leaky_relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Softplus => "softplus",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "elu" => Activation::Elu,
            "relu" => Activation::Relu,
            "leaky_relu" | "leakyrelu" => Activation::LeakyRelu,
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            "softplus" => Activation::Softplus,
            "identity" | "linear" => Activation::Identity,
            other => return Err(Error::invalid(format!("unknown activation {other:?}"))),
        })
    }

    pub const ALL: [Activation; 7] = [
        Activation::Elu,
        Activation::Relu,
        Activation::LeakyRelu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Softplus,
        Activation::Identity,
    ];
}

/// Layer widths from input to output plus the hidden activation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MlpArchitecture {
    widths: Vec<usize>,
    activation: Activation,
}

/// Location of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_len(&self) -> usize {
        self.fan_in * self.fan_out
    }

    pub fn param_count(&self) -> usize {
        self.weight_len() + self.fan_out
    }

    pub fn bias_offset(&self) -> usize {
        self.offset + self.weight_len()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.param_count()
    }
}

impl MlpArchitecture {
    pub fn new(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid("an MLP needs at least an input and an output layer"));
        }
        if widths.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(Self { widths, activation })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut offset = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let shape = LayerShape {
                    fan_in: w[0],
                    fan_out: w[1],
                    offset,
                };
                offset += shape.param_count();
                shape
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// `"64-10-10:elu"`.
    pub fn describe(&self) -> String {
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        format!("{}:{}", widths.join("-"), self.activation.name())
    }

    pub fn parse(s: &str) -> Result<Self> {
        let (widths, act) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("architecture {s:?} must look like 64-10-10:elu")))?;
        let widths = widths
            .split('-')
            .map(|w| {
                w.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad layer width {w:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(widths, Activation::parse(act)?)
    }
}

/// Weights and biases of one model, or a gradient of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: MlpArchitecture,
    layers: Vec<LayerShape>,
    data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(arch: &MlpArchitecture) -> Self {
        Self {
            layers: arch.layers(),
            data: vec![0.0; arch.parameter_count()],
            arch: arch.clone(),
        }
    }

    pub fn from_flat(arch: &MlpArchitecture, data: Vec<f64>) -> Result<Self> {
        if data.len() != arch.parameter_count() {
            return Err(Error::DimensionMismatch {
                expected: arch.parameter_count(),
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(Self {
            layers: arch.layers(),
            data,
            arch: arch.clone(),
        })
    }

    pub fn arch(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let s = self.layers[layer];
        &self.data[s.offset..s.bias_offset()]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let s = self.layers[layer];
        &self.data[s.bias_offset()..s.offset + s.param_count()]
    }

    pub fn layer_slice(&self, layer: usize) -> &[f64] {
        &self.data[self.layers[layer].range()]
    }

    pub fn layer_slice_mut(&mut self, layer: usize) -> &mut [f64] {
        let r = self.layers[layer].range();
        &mut self.data[r]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l2_distance(&self, other: &ModelParams) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Runs the network on `x` and returns the pre-softmax outputs.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut ws = Workspace::new(&self.arch);
        self.forward_ws(x, &mut ws);
        Ok(ws.output().to_vec())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn forward_ws(&self, x: &[f64], ws: &mut Workspace) {
        let act = self.arch.activation;
        let last = self.layers.len() - 1;
        for (l, shape) in self.layers.iter().enumerate() {
            let w = &self.data[shape.offset..shape.bias_offset()];
            let b = &self.data[shape.bias_offset()..shape.offset + shape.param_count()];
            let (before, after) = ws.post.split_at_mut(l);
            let input: &[f64] = if l == 0 { x } else { &before[l - 1] };
            let pre = &mut ws.pre[l];
            for (j, row) in w.chunks_exact(shape.fan_in).enumerate() {
                let mut acc = b[j];
                for (wk, ak) in row.iter().zip(input) {
                    acc += wk * ak;
                }
                pre[j] = acc;
            }
            let post = &mut after[0];
            if l == last {
                post.copy_from_slice(pre);
            } else {
                for (p, &z) in post.iter_mut().zip(pre.iter()) {
                    *p = act.apply(z);
                }
            }
        }
    }

    /// Adds the gradient of a scalar loss with output gradient `dout` (with
    /// respect to the pre-softmax outputs) into `grad`. `ws` must hold the
    /// forward pass of `x`.
    pub(crate) fn backward_ws(&self, x: &[f64], ws: &mut Workspace, dout: &[f64], grad: &mut [f64]) {
        let act = self.arch.activation;
        let n_layers = self.layers.len();
        ws.delta[n_layers - 1].copy_from_slice(dout);
        for l in (0..n_layers).rev() {
            let shape = self.layers[l];
            let input: &[f64] = if l == 0 { x } else { &ws.post[l - 1] };
            {
                let delta = &ws.delta[l];
                let g = &mut grad[shape.offset..shape.offset + shape.param_count()];
                let (gw, gb) = g.split_at_mut(shape.weight_len());
                for (j, row) in gw.chunks_exact_mut(shape.fan_in).enumerate() {
                    let dj = delta[j];
                    for (gk, ak) in row.iter_mut().zip(input) {
                        *gk += dj * ak;
                    }
                    gb[j] += dj;
                }
            }
            if l > 0 {
                let w = &self.data[shape.offset..shape.bias_offset()];
                let (lower, upper) = ws.delta.split_at_mut(l);
                let prev = &mut lower[l - 1];
                let delta = &upper[0];
                prev.iter_mut().for_each(|v| *v = 0.0);
                for (row, &dj) in w.chunks_exact(shape.fan_in).zip(delta.iter()) {
                    for (pk, wk) in prev.iter_mut().zip(row) {
                        *pk += wk * dj;
                    }
                }
                for (pk, &z) in prev.iter_mut().zip(ws.pre[l - 1].iter()) {
                    *pk *= act.derivative(z);
                }
            }
        }
    }

    /// Mean softmax cross-entropy over `batch` and its gradient.
    pub fn loss_and_grad(&self, batch: &[DataPoint]) -> Result<(f64, ModelParams)> {
        if batch.is_empty() {
            return Err(Error::Empty("loss of an empty batch".into()));
        }
        let mut ws = Workspace::new(&self.arch);
        let mut grad = ModelParams::zeros(&self.arch);
        let mut total = 0.0;
        for p in batch {
            self.check_label(p)?;
            total += self.example_grad_into(p, &mut ws, grad.as_mut_slice());
        }
        let n = batch.len() as f64;
        let loss = total / n;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss {loss}")));
        }
        grad.data.iter_mut().for_each(|g| *g /= n);
        Ok((loss, grad))
    }

    /// Cross-entropy of a single example.
    pub fn example_loss(&self, z: &DataPoint) -> Result<f64> {
        self.check_label(z)?;
        let logits = self.forward(&z.x)?;
        Ok(cross_entropy(&logits, z.y))
    }

    /// Accuracy of `argmax` predictions.
    pub fn accuracy(&self, points: &[DataPoint]) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        let mut ws = Workspace::new(&self.arch);
        let correct = points
            .iter()
            .filter(|p| {
                self.forward_ws(&p.x, &mut ws);
                argmax(ws.output()) == p.y
            })
            .count();
        correct as f64 / points.len() as f64
    }

    fn check_label(&self, p: &DataPoint) -> Result<()> {
        self.check_input(&p.x)?;
        if p.y >= self.arch.output_dim() {
            return Err(Error::invalid(format!(
                "label {} out of range for {} outputs",
                p.y,
                self.arch.output_dim()
            )));
        }
        Ok(())
    }

    /// Forward + backward for one example; adds its cross-entropy
    /// gradient into `grad` and returns its loss.
    pub(crate) fn example_grad_into(&self, p: &DataPoint, ws: &mut Workspace, grad: &mut [f64]) -> f64 {
        self.forward_ws(&p.x, ws);
        let logits = ws.output();
        let lse = log_sum_exp(logits);
        let loss = lse - logits[p.y];
        let mut dout = std::mem::take(&mut ws.dout);
        for (d, &o) in dout.iter_mut().zip(ws.output()) {
            *d = (o - lse).exp();
        }
        dout[p.y] -= 1.0;
        self.backward_ws(&p.x, ws, &dout, grad);
        ws.dout = dout;
        loss
    }

    /// Per-layer fraction of parameters whose single-example loss gradient
    /// is exactly zero.
    pub fn zero_grad_fraction(&self, z: &DataPoint) -> Result<Vec<f64>> {
        self.check_label(z)?;
        let mut ws = Workspace::new(&self.arch);
        let mut grad = vec![0.0; self.parameter_count()];
        self.example_grad_into(z, &mut ws, &mut grad);
        Ok(self
            .layers
            .iter()
            .map(|s| {
                let zeros = grad[s.range()].iter().filter(|&&g| g == 0.0).count();
                zeros as f64 / s.param_count() as f64
            })
            .collect())
    }
}

/// Reusable activation buffers for one network.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    dout: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(arch: &MlpArchitecture) -> Self {
        let widths = &arch.widths()[1..];
        Self {
            pre: widths.iter().map(|&w| vec![0.0; w]).collect(),
            post: widths.iter().map(|&w| vec![0.0; w]).collect(),
            delta: widths.iter().map(|&w| vec![0.0; w]).collect(),
            dout: vec![0.0; arch.output_dim()],
        }
    }

    pub(crate) fn output(&self) -> &[f64] {
        self.post.last().expect("at least one layer")
    }
}

/// Lecun-normal weights (std `1/sqrt(fan_in)`), zero biases.
pub fn init_params(arch: &MlpArchitecture, seed: u64) -> ModelParams {
    let mut params = ModelParams::zeros(arch);
    let root = Rng::new(seed).named("init");
    for (l, shape) in arch.layers().iter().enumerate() {
        let normal = Normal::new(0.0, 1.0 / (shape.fan_in as f64).sqrt()).expect("positive std");
        let mut stream = root.child(l as u64).stream();
        for w in &mut params.data[shape.offset..shape.bias_offset()] {
            *w = normal.sample(&mut stream);
        }
    }
    params
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_softmax(v: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(v);
    v.iter().map(|x| x - lse).collect()
}

pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}

/// Index of the largest entry; lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assert_ne, prop_assume, proptest, ProptestConfig};
    use rand::Rng as _;

    fn arch(widths: &[usize], act: Activation) -> MlpArchitecture {
        MlpArchitecture::new(widths.to_vec(), act).unwrap()
    }

    fn random_params(a: &MlpArchitecture, seed: u64) -> ModelParams {
        let mut p = init_params(a, seed);
        let mut rng = Rng::new(seed).named("bias").stream();
        for l in 0..a.num_layers() {
            let s = p.layers()[l];
            for b in &mut p.as_mut_slice()[s.bias_offset()..s.offset + s.param_count()] {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        p
    }

    fn random_batch(d: usize, k: usize, n: usize, seed: u64) -> Vec<DataPoint> {
        let mut rng = Rng::new(seed).stream();
        (0..n)
            .map(|_| {
                DataPoint::new(
                    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    rng.random_range(0..k),
                )
            })
            .collect()
    }

    /// Straight-line forward pass written independently of the workspace code.
    fn reference_forward(p: &ModelParams, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let n = p.arch().num_layers();
        for l in 0..n {
            let s = p.layers()[l];
            let w = p.weights(l);
            let b = p.bias(l);
            let mut out = Vec::with_capacity(s.fan_out);
            for j in 0..s.fan_out {
                let mut z = b[j];
                for k in 0..s.fan_in {
                    z += w[j * s.fan_in + k] * a[k];
                }
                out.push(if l + 1 < n { p.arch().activation().apply(z) } else { z });
            }
            a = out;
        }
        a
    }

    #[test]
    fn architecture_validation() {
        assert!(MlpArchitecture::new(vec![3], Activation::Elu).is_err());
        assert!(MlpArchitecture::new(vec![3, 0, 2], Activation::Elu).is_err());
        let a = arch(&[64, 4, 10], Activation::Elu);
        assert_eq!(a.parameter_count(), 64 * 4 + 4 + 4 * 10 + 10);
        assert_eq!(a.parameter_count(), 310);
        assert_eq!(MlpArchitecture::parse(&a.describe()).unwrap(), a);
        let mnist = arch(&[784, 10, 10], Activation::Elu);
        assert_eq!(mnist.parameter_count(), 7960);
        assert_eq!(mnist.layers()[1].param_count(), 110);
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = arch(&[64, 4, 10], Activation::Elu);
        assert_eq!(init_params(&a, 7), init_params(&a, 7));
        assert_ne!(init_params(&a, 7), init_params(&a, 8));
        let p = init_params(&a, 7);
        assert!(p.bias(0).iter().chain(p.bias(1)).all(|&b| b == 0.0));
    }

    #[test]
    fn init_std_matches_lecun() {
        // 784→10 layer: 7840 draws per seed, 13 seeds ≈ 10^5 draws.
        let a = arch(&[784, 10], Activation::Identity);
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut count = 0.0;
        for seed in 0..13 {
            for &w in init_params(&a, seed).weights(0) {
                sum += w;
                sq += w * w;
                count += 1.0;
            }
        }
        let mean = sum / count;
        let std = (sq / count - mean * mean).sqrt();
        let expected = 1.0 / 784f64.sqrt();
        assert!((std - expected).abs() < 0.1 * expected, "std {std} vs {expected}");
    }

    #[test]
    fn forward_trivial_cases() {
        let a = arch(&[3, 5, 2], Activation::Identity);
        let zero = ModelParams::zeros(&a);
        assert_eq!(zero.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
        assert!(zero.forward(&[1.0]).is_err());

        let lin = arch(&[2, 2], Activation::Relu);
        let p = ModelParams::from_flat(&lin, vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5]).unwrap();
        assert_eq!(p.forward(&[1.0, 1.0]).unwrap(), vec![3.5, 6.5]);
    }

    #[test]
    fn forward_matches_reference() {
        for act in Activation::ALL {
            let a = arch(&[6, 7, 5, 3], act);
            let p = random_params(&a, 11);
            for pt in random_batch(6, 3, 10, 2) {
                let got = p.forward(&pt.x).unwrap();
                let want = reference_forward(&p, &pt.x);
                for (g, w) in got.iter().zip(&want) {
                    assert!((g - w).abs() <= 1e-12, "{act:?}: {g} vs {w}");
                }
            }
        }
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let a = arch(&[4, 10], Activation::Identity);
        let p = ModelParams::zeros(&a);
        let batch = random_batch(4, 10, 5, 1);
        let (loss, _) = p.loss_and_grad(&batch).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-15);
        assert!(p.loss_and_grad(&[]).is_err());
    }

    fn finite_difference_check(act: Activation, seed: u64) -> f64 {
        let a = arch(&[5, 6, 4, 3], act);
        let p = random_params(&a, seed);
        let batch = random_batch(5, 3, 4, seed + 100);
        let (_, grad) = p.loss_and_grad(&batch).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..p.parameter_count() {
            let mut plus = p.clone();
            plus.as_mut_slice()[i] += h;
            let mut minus = p.clone();
            minus.as_mut_slice()[i] -= h;
            let fd = (plus.loss_and_grad(&batch).unwrap().0 - minus.loss_and_grad(&batch).unwrap().0) / (2.0 * h);
            let g = grad.as_slice()[i];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // ReLU and LeakyReLU are skipped: kinks make central differences
        // unreliable when a pre-activation lands within h of zero.
        for act in [
            Activation::Elu,
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Softplus,
            Activation::Identity,
        ] {
            let worst = finite_difference_check(act, 3);
            assert!(worst <= 1e-4, "{act:?}: max rel err {worst}");
        }
    }

    #[test]
    fn duplicating_batch_keeps_mean() {
        let a = arch(&[4, 5, 3], Activation::Elu);
        let p = random_params(&a, 5);
        let batch = random_batch(4, 3, 6, 9);
        let doubled: Vec<DataPoint> = batch.iter().flat_map(|b| [b.clone(), b.clone()]).collect();
        let (l1, g1) = p.loss_and_grad(&batch).unwrap();
        let (l2, g2) = p.loss_and_grad(&doubled).unwrap();
        assert!((l1 - l2).abs() <= 1e-14 * l1.abs().max(1.0));
        for (x, y) in g1.as_slice().iter().zip(g2.as_slice()) {
            assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn zero_grad_fraction_cases() {
        let a = arch(&[4, 3, 2], Activation::Identity);
        let p = random_params(&a, 2);
        let z = DataPoint::new(vec![0.3, -0.7, 0.2, 0.9], 1);
        assert_eq!(p.zero_grad_fraction(&z).unwrap(), vec![0.0, 0.0]);

        let relu = arch(&[4, 3, 2], Activation::Relu);
        let mut dead = random_params(&relu, 2);
        // All-negative hidden pre-activations: zero first layer, bias -1.
        let s = dead.layers()[0];
        dead.as_mut_slice()[s.range()].iter_mut().for_each(|v| *v = 0.0);
        dead.as_mut_slice()[s.bias_offset()..s.offset + s.param_count()]
            .iter_mut()
            .for_each(|v| *v = -1.0);
        let frac = dead.zero_grad_fraction(&z).unwrap();
        assert_eq!(frac[0], 1.0);
    }

    #[test]
    fn activations_are_total() {
        for act in Activation::ALL {
            for z in [-1e6, -30.0, -1.0, -1e-300, 0.0, 1e-300, 1.0, 30.0, 1e6] {
                assert!(act.apply(z).is_finite(), "{act:?}({z})");
                assert!(act.derivative(z).is_finite(), "{act:?}'({z})");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn backprop_matches_finite_differences(seed in 0u64..10_000) {
            let act = [Activation::Elu, Activation::Tanh, Activation::Softplus][seed as usize % 3];
            let worst = finite_difference_check(act, seed);
            prop_assert!(worst <= 1e-4, "max rel err {}", worst);
        }

        #[test]
        fn init_seed_changes_params(a in 0u64..u64::MAX, b in 0u64..u64::MAX) {
            prop_assume!(a != b);
            let arch = arch(&[3, 2, 2], Activation::Elu);
            prop_assert_ne!(init_params(&arch, a), init_params(&arch, b));
        }
    }
}
