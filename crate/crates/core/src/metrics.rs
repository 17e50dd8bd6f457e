//! Reconstruction error, the nearest-neighbour oracle baseline and the
//! KL probe.

use crate::error::{Error, Result};
use crate::nn::{log_softmax, ModelParams};
use crate::stats::{percentile, Histogram};

pub const HISTOGRAM_BINS: usize = 100;

/// Mean squared coordinate difference.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(sq_dist(a, b) / a.len() as f64)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Closest pool element under MSE; ties go to the lowest index.
pub fn nn_oracle<P: AsRef<[f64]>>(target: &[f64], pool: &[P]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in pool.iter().enumerate() {
        let d = mse(target, p.as_ref())?;
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best.ok_or_else(|| Error::Empty("nearest-neighbour pool".into()))
}

/// Nearest-neighbour distances and the distance distribution for a set of
/// targets against everything the adversary holds.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub nn_index: Vec<usize>,
    pub nn_distance: Vec<f64>,
    /// Target-to-pool MSEs pooled over all targets, 100 bins on `[0, max]`.
    pub histogram: Histogram,
    /// 1st, 10th and 50th percentile of target-to-pool MSE, each computed
    /// per target and averaged over targets.
    pub p1: f64,
    pub p10: f64,
    pub p50: f64,
    pub mean_nn_distance: f64,
}

impl OracleReport {
    /// The success threshold: mean nearest-neighbour distance.
    pub fn threshold(&self) -> f64 {
        self.mean_nn_distance
    }
}

pub fn oracle_report<T: AsRef<[f64]>, P: AsRef<[f64]> + Sync>(targets: &[T], pool: &[P]) -> Result<OracleReport> {
    if targets.is_empty() {
        return Err(Error::Empty("oracle targets".into()));
    }
    if pool.is_empty() {
        return Err(Error::Empty("nearest-neighbour pool".into()));
    }
    let mut nn_index = Vec::with_capacity(targets.len());
    let mut nn_distance = Vec::with_capacity(targets.len());
    let mut all = Vec::with_capacity(targets.len() * pool.len());
    let (mut p1, mut p10, mut p50) = (0.0, 0.0, 0.0);
    for t in targets {
        let dists = pool
            .iter()
            .map(|p| mse(t.as_ref(), p.as_ref()))
            .collect::<Result<Vec<f64>>>()?;
        let (i, d) = nn_oracle(t.as_ref(), pool)?;
        nn_index.push(i);
        nn_distance.push(d);
        p1 += percentile(&dists, 1.0);
        p10 += percentile(&dists, 10.0);
        p50 += percentile(&dists, 50.0);
        all.extend(dists);
    }
    let n = targets.len() as f64;
    let max = all.iter().copied().fold(0.0, f64::max);
    Ok(OracleReport {
        histogram: Histogram::new(&all, 0.0, max, HISTOGRAM_BINS),
        p1: p1 / n,
        p10: p10 / n,
        p50: p50 / n,
        mean_nn_distance: nn_distance.iter().sum::<f64>() / n,
        nn_index,
        nn_distance,
    })
}

/// `KL(softmax(f(z)) ‖ softmax(f(ẑ)))` in nats under a probe classifier.
pub fn kl_probe(probe: &ModelParams, z: &[f64], z_hat: &[f64]) -> Result<f64> {
    let lp = log_softmax(&probe.forward(z)?);
    let lq = log_softmax(&probe.forward(z_hat)?);
    let kl: f64 = lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum();
    Ok(kl.max(0.0))
}

/// Strictly below the oracle threshold counts as a reconstruction.
pub fn judge_success(attack_mse: f64, oracle_threshold: f64) -> bool {
    attack_mse < oracle_threshold
}
