//! Reconstruction robustness (ReRo).
//!
//! A mechanism is `(η, γ)`-ReRo for a prior `π` and error `ℓ` if no attack
//! reconstructs a `Z ~ π` to within `η` with probability above `γ`. The
//! bounds below relate `γ` to DP/RDP/zCDP parameters through the baseline
//! error `κ = sup_{z₀} Pr_{Z~π}[ℓ(Z, z₀) ≤ η]`, the success rate of the best
//! guess that ignores the mechanism's output.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::accounting::PrivacyParams;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::stats::{wilson99, Proportion};

/// A user-supplied sampler; must be deterministic given the stream.
pub type SamplerFn = Arc<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync>;

/// The adversary's prior over the target record.
#[derive(Clone)]
pub enum Prior {
    /// Uniform on the unit Euclidean ball in `dim` dimensions.
    UniformBall { dim: usize },
    /// Isotropic `N(center, σ² I)`.
    Gaussian { center: Vec<f64>, sigma: f64 },
    /// Mass `p` on `z` and `1 − p` on `z_prime`.
    TwoPoint { p: f64, z: Vec<f64>, z_prime: Vec<f64> },
    /// Finite support with probability masses.
    FiniteDiscrete { points: Vec<Vec<f64>>, masses: Vec<f64> },
    /// Anything that can be sampled.
    Empirical { name: String, sampler: SamplerFn },
}

impl fmt::Debug for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prior::UniformBall { dim } => write!(f, "UniformBall(d={dim})"),
            Prior::Gaussian { center, sigma } => write!(f, "Gaussian(d={}, σ={sigma})", center.len()),
            Prior::TwoPoint { p, .. } => write!(f, "TwoPoint(p={p})"),
            Prior::FiniteDiscrete { points, .. } => write!(f, "FiniteDiscrete(n={})", points.len()),
            Prior::Empirical { name, .. } => write!(f, "Empirical({name})"),
        }
    }
}

impl Prior {
    pub fn finite(points: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != masses.len() {
            return Err(Error::invalid("finite prior needs one mass per point"));
        }
        if masses.iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::invalid("masses must be nonnegative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(Prior::FiniteDiscrete { points, masses })
    }

    pub fn uniform_over(points: Vec<Vec<f64>>) -> Result<Self> {
        let m = 1.0 / points.len().max(1) as f64;
        let masses = vec![m; points.len()];
        Self::finite(points, masses)
    }

    pub fn two_point(p: f64, z: Vec<f64>, z_prime: Vec<f64>) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("two-point mass must lie in (0, 1)"));
        }
        if z == z_prime {
            return Err(Error::invalid("two-point prior needs distinct points"));
        }
        Ok(Prior::TwoPoint { p, z, z_prime })
    }

    /// Finite support and masses, when the prior has them.
    pub fn support(&self) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        match self {
            Prior::FiniteDiscrete { points, masses } => Some((points.clone(), masses.clone())),
            Prior::TwoPoint { p, z, z_prime } => Some((vec![z.clone(), z_prime.clone()], vec![*p, 1.0 - p])),
            _ => None,
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Prior::UniformBall { dim } => {
                let dir: Vec<f64> = (0..*dim).map(|_| StandardNormal.sample(rng)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                let radius = rng.random::<f64>().powf(1.0 / *dim as f64);
                dir.iter().map(|v| v / norm * radius).collect()
            }
            Prior::Gaussian { center, sigma } => center
                .iter()
                .map(|c| c + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                .collect(),
            Prior::TwoPoint { p, z, z_prime } => {
                if rng.random::<f64>() < *p {
                    z.clone()
                } else {
                    z_prime.clone()
                }
            }
            Prior::FiniteDiscrete { points, masses } => points[sample_index(masses, rng)].clone(),
            Prior::Empirical { sampler, .. } => sampler(rng),
        }
    }
}

fn sample_index(masses: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, m) in masses.iter().enumerate() {
        acc += m;
        if u < acc {
            return i;
        }
    }
    masses.len() - 1
}

/// Reconstruction error function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorFn {
    L2,
    ZeroOne,
}

impl ErrorFn {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            ErrorFn::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            ErrorFn::ZeroOne => f64::from(a != b),
        }
    }
}

/// Which result produced a bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundSource {
    /// RDP → ReRo.
    Thm2 { alpha: f64, epsilon: f64 },
    /// Pure DP → ReRo (`α → ∞`).
    Cor1 { epsilon: f64 },
    /// zCDP → ReRo with the optimal `α`.
    Cor2 { rho: f64 },
    /// Uniform unit-ball prior.
    Prop1,
    /// Gaussian prior.
    Prop2,
}

impl BoundSource {
    pub fn label(&self) -> &'static str {
        match self {
            BoundSource::Thm2 { .. } => "thm2",
            BoundSource::Cor1 { .. } => "cor1",
            BoundSource::Cor2 { .. } => "cor2",
            BoundSource::Prop1 => "prop1",
            BoundSource::Prop2 => "prop2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReRoBound {
    pub eta: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub source: BoundSource,
}

/// κ for the uniform unit ball, with a flag when `η ≥ 1` makes it trivially 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallKappa {
    pub kappa: f64,
    pub degenerate: bool,
}

/// κ of `U(B₁ᵈ(0))` under ℓ2: the ball of radius `η` at the origin lies
/// inside the unit ball, so `κ = ηᵈ`.
pub fn kappa_uniform_ball(eta: f64, dim: usize) -> Result<BallKappa> {
    if !(eta > 0.0) || dim == 0 {
        return Err(Error::invalid("need η > 0 and d ≥ 1"));
    }
    if eta >= 1.0 {
        return Ok(BallKappa {
            kappa: 1.0,
            degenerate: true,
        });
    }
    Ok(BallKappa {
        kappa: eta.powi(dim as i32),
        degenerate: false,
    })
}

/// Chi-squared tail bound on κ for `N(w, σ² I_d)` under ℓ2:
/// `exp((d/2)(1 − q + ln q))` with `q = η²/(σ² d)`; 1 once `q ≥ 1`.
pub fn kappa_gaussian_bound(eta: f64, sigma: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let q = eta * eta / (sigma * sigma * d);
    if q >= 1.0 {
        return 1.0;
    }
    if q <= 0.0 {
        return 0.0;
    }
    (0.5 * d * (1.0 - q + q.ln())).exp().min(1.0)
}

/// Exact κ for the Gaussian prior: the guess at the center is optimal, so
/// `κ = Pr[χ²_d ≤ η²/σ²]`.
pub fn kappa_gaussian_exact(eta: f64, sigma: f64, dim: usize) -> Result<f64> {
    let chi = ChiSquared::new(dim as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(chi.cdf(eta * eta / (sigma * sigma)))
}

/// κ of the two-point prior under ℓ_{0/1} with `η < 1`.
pub fn kappa_two_point(p: f64) -> f64 {
    p.max(1.0 - p)
}

/// Monte-Carlo (or exact, for finite priors) estimate of κ over a list of
/// candidate guesses.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaEstimate {
    pub estimate: f64,
    /// Wilson 99% interval of the maximizing candidate; zero width when exact.
    pub lower: f64,
    pub upper: f64,
    pub best_candidate: usize,
    pub exact: bool,
}

impl KappaEstimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

pub fn kappa_monte_carlo(
    prior: &Prior,
    ell: ErrorFn,
    eta: f64,
    candidates: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<KappaEstimate> {
    if candidates.is_empty() {
        return Err(Error::Empty("κ candidates".into()));
    }
    if let Some((points, masses)) = prior.support() {
        let mut best = (0, f64::NEG_INFINITY);
        for (j, c) in candidates.iter().enumerate() {
            let mass: f64 = points
                .iter()
                .zip(&masses)
                .filter(|(p, _)| ell.eval(p, c) <= eta)
                .map(|(_, m)| m)
                .sum();
            if mass > best.1 {
                best = (j, mass);
            }
        }
        return Ok(KappaEstimate {
            estimate: best.1,
            lower: best.1,
            upper: best.1,
            best_candidate: best.0,
            exact: true,
        });
    }
    if n_samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let mut stream = Rng::new(seed).named("kappa").stream();
    let mut hits = vec![0u64; candidates.len()];
    for _ in 0..n_samples {
        let z = prior.sample(&mut stream);
        for (h, c) in hits.iter_mut().zip(candidates) {
            if ell.eval(&z, c) <= eta {
                *h += 1;
            }
        }
    }
    let (best, &count) = hits
        .iter()
        .enumerate()
        .fold((0, &hits[0]), |acc, (i, h)| if *h > *acc.1 { (i, h) } else { acc });
    let ci = wilson99(count, n_samples as u64);
    Ok(KappaEstimate {
        estimate: ci.estimate,
        lower: ci.lower,
        upper: ci.upper,
        best_candidate: best,
        exact: false,
    })
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::invalid(format!("κ = {kappa} outside [0, 1]")));
    }
    Ok(())
}

/// `(α, ε)`-RDP ⇒ `(η, γ)`-ReRo with `γ = (κ e^ε)^((α−1)/α)`, clamped to 1.
pub fn rdp_to_rero(alpha: f64, epsilon: f64, kappa: f64, eta: f64) -> Result<ReRoBound> {
    if !(alpha > 1.0) {
        return Err(Error::invalid("α must exceed 1"));
    }
    check_kappa(kappa)?;
    let gamma = if kappa == 0.0 {
        0.0
    } else {
        (((alpha - 1.0) / alpha) * (kappa.ln() + epsilon)).exp().min(1.0)
    };
    Ok(ReRoBound {
        eta,
        kappa,
        gamma,
        source: BoundSource::Thm2 { alpha, epsilon },
    })
}

/// ε-DP ⇒ `(η, κ e^ε)`-ReRo, clamped to 1.
pub fn puredp_to_rero(epsilon: f64, kappa: f64, eta: f64) -> Result<ReRoBound> {
    check_kappa(kappa)?;
    let gamma = if kappa == 0.0 {
        0.0
    } else {
        (kappa.ln() + epsilon).exp().min(1.0)
    };
    Ok(ReRoBound {
        eta,
        kappa,
        gamma,
        source: BoundSource::Cor1 { epsilon },
    })
}

/// ρ-zCDP ⇒ `(η, exp(−(√ln(1/κ) − √ρ)²))`-ReRo when `ρ < ln(1/κ)`;
/// vacuous (`γ = 1`) otherwise.
pub fn zcdp_to_rero(rho: f64, kappa: f64, eta: f64) -> Result<ReRoBound> {
    check_kappa(kappa)?;
    if rho < 0.0 {
        return Err(Error::invalid("ρ must be nonnegative"));
    }
    let log_inv = -kappa.ln();
    let gamma = if rho < log_inv {
        let gap = log_inv.sqrt() - rho.sqrt();
        (-gap * gap).exp()
    } else {
        1.0
    };
    Ok(ReRoBound {
        eta,
        kappa,
        gamma,
        source: BoundSource::Cor2 { rho },
    })
}

/// ReRo against every two-point prior with `p = 1/(e^ε + 1)` under exact
/// reconstruction implies `(ε, δ)`-DP with `δ = max(0, (e^ε + 1)γ − e^ε)`.
pub fn rero_to_dp(epsilon: f64, gamma: f64) -> Result<f64> {
    if epsilon < 0.0 || !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid("need ε ≥ 0 and γ ∈ [0, 1]"));
    }
    let e = epsilon.exp();
    Ok(((e + 1.0) * gamma - e).max(0.0))
}

/// High-dimensional prior for [`prop_gamma`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HighDimPrior {
    UniformBall { eta: f64 },
    Gaussian { eta: f64, sigma: f64 },
}

/// γ for a `d`-dimensional uniform-ball or Gaussian prior under ℓ2.
pub fn prop_gamma(dim: usize, privacy: PrivacyParams, prior: HighDimPrior) -> Result<ReRoBound> {
    privacy.validate()?;
    let (eta, kappa, source) = match prior {
        HighDimPrior::UniformBall { eta } => {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::invalid("uniform-ball bound needs η ∈ (0, 1)"));
            }
            (eta, kappa_uniform_ball(eta, dim)?.kappa, BoundSource::Prop1)
        }
        HighDimPrior::Gaussian { eta, sigma } => {
            if !(eta > 0.0) {
                return Err(Error::invalid("Gaussian bound needs η > 0"));
            }
            let min_sigma = 2.0 * eta / (dim as f64).sqrt();
            if sigma < min_sigma * (1.0 - 1e-12) {
                return Err(Error::invalid(format!(
                    "Gaussian bound needs σ ≥ 2η/√d = {min_sigma}, got {sigma}"
                )));
            }
            (eta, kappa_gaussian_bound(eta, sigma, dim), BoundSource::Prop2)
        }
    };
    let inner = match privacy {
        PrivacyParams::PureDp { epsilon } => puredp_to_rero(epsilon, kappa, eta)?,
        PrivacyParams::Zcdp { rho } => zcdp_to_rero(rho, kappa, eta)?,
        other => {
            return Err(Error::invalid(format!(
                "high-dimensional bounds take pure DP or zCDP, not {other:?}"
            )))
        }
    };
    Ok(ReRoBound { source, ..inner })
}

/// Maximum-a-posteriori reconstruction over a finite prior.
///
/// `log_likelihoods[i]` is `log p(θ | z_i)` for the observed output θ.
/// Returns the index of the support point maximizing the posterior mass
/// within `η`; lowest index on ties.
pub fn map_attack_finite(
    points: &[Vec<f64>],
    masses: &[f64],
    log_likelihoods: &[f64],
    ell: ErrorFn,
    eta: f64,
) -> Result<usize> {
    if points.len() != masses.len() || points.len() != log_likelihoods.len() || points.is_empty() {
        return Err(Error::invalid("points, masses and likelihoods must align"));
    }
    let top = log_likelihoods
        .iter()
        .zip(masses)
        .filter(|(_, &m)| m > 0.0)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Numerical("zero total posterior mass".into()));
    }
    let posterior: Vec<f64> = log_likelihoods
        .iter()
        .zip(masses)
        .map(|(l, m)| m * (l - top).exp())
        .collect();
    if !(posterior.iter().sum::<f64>() > 0.0) {
        return Err(Error::Numerical("zero total posterior mass".into()));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (j, c) in points.iter().enumerate() {
        let score: f64 = points
            .iter()
            .zip(&posterior)
            .filter(|(p, _)| ell.eval(p, c) <= eta)
            .map(|(_, w)| w)
            .sum();
        if score > best.1 {
            best = (j, score);
        }
    }
    Ok(best.0)
}

/// Monte-Carlo estimate of `Pr[ℓ(Z, R(M(D− ∪ {Z}))) ≤ η]` with `Z ~ π`.
///
/// Trial `t` draws `Z` and the mechanism seed from child streams of `seed`
/// labelled `t`, so results do not depend on execution order.
#[allow(clippy::too_many_arguments)]
pub fn empirical_rero<D, O, M, R>(
    mechanism: M,
    prior: &Prior,
    attack: R,
    fixed: &D,
    ell: ErrorFn,
    eta: f64,
    n_trials: usize,
    seed: u64,
) -> Result<Proportion>
where
    D: ?Sized,
    M: Fn(&D, &[f64], u64) -> Result<O>,
    R: Fn(&O) -> Result<Vec<f64>>,
{
    if n_trials < 100 {
        return Err(Error::invalid("empirical ReRo needs at least 100 trials"));
    }
    let root = Rng::new(seed).named("rero-trials");
    let mut hits = 0u64;
    for t in 0..n_trials {
        let trial = root.child(t as u64);
        let z = prior.sample(&mut trial.named("prior").stream());
        let out = mechanism(fixed, &z, trial.named("mechanism").seed())?;
        let z_hat = attack(&out)?;
        if ell.eval(&z, &z_hat) <= eta {
            hits += 1;
        }
    }
    Ok(wilson99(hits, n_trials as u64))
}

/// `M(D) = mean(D) + N(0, s² I)`: the toy mechanism whose zCDP is exact
/// and whose posterior is available in closed form.
#[derive(Debug, Clone)]
pub struct GaussianMeanRelease {
    fixed_sum: Vec<f64>,
    n: usize,
    pub noise_std: f64,
}

impl GaussianMeanRelease {
    /// `fixed` holds the `n − 1` known records.
    pub fn new(fixed: &[Vec<f64>], dim: usize, noise_std: f64) -> Result<Self> {
        if !(noise_std > 0.0) {
            return Err(Error::invalid("noise std must be > 0"));
        }
        let mut fixed_sum = vec![0.0; dim];
        for r in fixed {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
            for (s, v) in fixed_sum.iter_mut().zip(r) {
                *s += v;
            }
        }
        Ok(Self {
            fixed_sum,
            n: fixed.len() + 1,
            noise_std,
        })
    }

    /// Noise std giving exactly `rho`-zCDP under replacement within a set of
    /// diameter `diameter`.
    pub fn noise_for_rho(diameter: f64, n: usize, rho: f64) -> f64 {
        (diameter / n as f64) / (2.0 * rho).sqrt()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn clean_mean(&self, z: &[f64]) -> Vec<f64> {
        self.fixed_sum
            .iter()
            .zip(z)
            .map(|(s, v)| (s + v) / self.n as f64)
            .collect()
    }

    pub fn release(&self, z: &[f64], seed: u64) -> Vec<f64> {
        let mut stream = Rng::new(seed).named("gaussian-mean").stream();
        self.clean_mean(z)
            .into_iter()
            .map(|m| m + self.noise_std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut stream))
            .collect()
    }

    /// `log p(θ | z)` up to a constant shared by every `z`.
    pub fn log_likelihood(&self, theta: &[f64], z: &[f64]) -> f64 {
        let m = self.clean_mean(z);
        let sq: f64 = theta.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum();
        -sq / (2.0 * self.noise_std * self.noise_std)
    }

    /// ρ for records confined to a set of the given diameter.
    pub fn zcdp(&self, diameter: f64) -> f64 {
        let sens = diameter / self.n as f64;
        sens * sens / (2.0 * self.noise_std * self.noise_std)
    }
}

/// Largest pairwise ℓ2 distance.
pub fn diameter(points: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.max(ErrorFn::L2.eval(a, b));
        }
    }
    best
}

/// One cell of the soundness grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundnessRow {
    pub prior: String,
    pub rho: f64,
    pub eta: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub rate: Proportion,
}

impl SoundnessRow {
    /// Empirical rate within three half-widths of the bound.
    pub fn sound(&self) -> bool {
        self.rate.estimate <= self.gamma + 3.0 * self.rate.half_width()
    }
}

/// The named finite priors used by the soundness grid, in `[0, 1]^3`.
pub fn soundness_priors(seed: u64) -> Vec<(String, Prior)> {
    let root = Rng::new(seed).named("soundness-priors");
    let cube = |n: usize, label: &str| -> Vec<Vec<f64>> {
        let mut s = root.named(label).stream();
        (0..n).map(|_| (0..3).map(|_| s.random::<f64>()).collect()).collect()
    };
    let uniform = Prior::uniform_over(cube(40, "uniform")).expect("valid prior");
    let skew_points = cube(25, "skewed");
    let raw: Vec<f64> = (0..skew_points.len()).map(|i| 0.85f64.powi(i as i32)).collect();
    let total: f64 = raw.iter().sum();
    let skewed = Prior::finite(skew_points, raw.iter().map(|m| m / total).collect()).expect("valid prior");
    let pair = Prior::two_point(0.3, vec![0.2, 0.2, 0.2], vec![0.8, 0.8, 0.8]).expect("valid prior");
    vec![
        ("uniform40".to_string(), uniform),
        ("skewed25".to_string(), skewed),
        ("twopoint".to_string(), pair),
    ]
}

/// Checks the zCDP bound against the MAP attack on the Gaussian
/// mean-release mechanism over every `(ρ, η, prior)` combination.
pub fn soundness_suite(rhos: &[f64], etas: &[f64], n_fixed: usize, n_trials: usize, seed: u64) -> Result<Vec<SoundnessRow>> {
    let mut rows = Vec::new();
    let root = Rng::new(seed);
    let mut fixed_stream = root.named("fixed").stream();
    let fixed: Vec<Vec<f64>> = (0..n_fixed)
        .map(|_| (0..3).map(|_| fixed_stream.random::<f64>()).collect())
        .collect();
    for (name, prior) in soundness_priors(seed) {
        let (points, masses) = prior.support().expect("finite soundness priors");
        let diam = diameter(&points);
        for &rho in rhos {
            let noise = GaussianMeanRelease::noise_for_rho(diam, n_fixed + 1, rho);
            let mech = GaussianMeanRelease::new(&fixed, 3, noise)?;
            for &eta in etas {
                let kappa = kappa_monte_carlo(&prior, ErrorFn::L2, eta, &points, 0, 0)?.estimate;
                let gamma = zcdp_to_rero(mech.zcdp(diam), kappa, eta)?.gamma;
                let attack = |theta: &Vec<f64>| -> Result<Vec<f64>> {
                    let ll: Vec<f64> = points.iter().map(|p| mech.log_likelihood(theta, p)).collect();
                    Ok(points[map_attack_finite(&points, &masses, &ll, ErrorFn::L2, eta)?].clone())
                };
                let trial_seed = root.named(&name).child(rows.len() as u64).seed();
                let rate = empirical_rero(
                    |_: &(), z: &[f64], s: u64| Ok(mech.release(z, s)),
                    &prior,
                    attack,
                    &(),
                    ErrorFn::L2,
                    eta,
                    n_trials,
                    trial_seed,
                )?;
                rows.push(SoundnessRow {
                    prior: name.clone(),
                    rho,
                    eta,
                    kappa,
                    gamma,
                    rate,
                });
            }
        }
    }
    Ok(rows)
}

/// One row of a bound table.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub dim: usize,
    pub prior: String,
    pub privacy: PrivacyParams,
    pub bound: ReRoBound,
}

fn privacy_columns(p: &PrivacyParams) -> (&'static str, String) {
    match *p {
        PrivacyParams::PureDp { epsilon } => ("pure_dp", epsilon.to_string()),
        PrivacyParams::ApproxDp { epsilon, delta } => ("approx_dp", format!("{epsilon};{delta}")),
        PrivacyParams::Rdp { alpha, epsilon } => ("rdp", format!("{alpha};{epsilon}")),
        PrivacyParams::Zcdp { rho } => ("zcdp", rho.to_string()),
    }
}

/// CSV with columns `d,eta,prior,privacy,privacy_value,kappa,gamma,source`.
pub fn write_bound_table(rows: &[BoundRow], header_comment: Option<&str>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    if let Some(c) = header_comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "d,eta,prior,privacy,privacy_value,kappa,gamma,source")?;
    for r in rows {
        let (variant, value) = privacy_columns(&r.privacy);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.dim,
            r.bound.eta,
            r.prior,
            variant,
            value,
            r.bound.kappa,
            r.bound.gamma,
            r.bound.source.label()
        )?;
    }
    out.flush()?;
    Ok(())
}
