//! Privacy accounting for full-batch DP-GD.
//!
//! zCDP is the internal currency: T Gaussian steps with sensitivity `Δ`
//! and noise std `σC` compose to `ρ = T Δ² / (2 (σC)²)`. RDP and (ε, δ)
//! are derived views.

use crate::error::{Error, Result};

/// Neighbouring-dataset relation used for sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Adjacency {
    /// Datasets of equal size differing in one record: `Δ = 2C`.
    #[default]
    Replace,
    /// One record added or removed: `Δ = C`.
    AddRemove,
}

impl Adjacency {
    pub fn sensitivity(self, clip: f64) -> f64 {
        match self {
            Adjacency::Replace => 2.0 * clip,
            Adjacency::AddRemove => clip,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "replace" => Ok(Adjacency::Replace),
            "add_remove" | "addremove" | "add-remove" => Ok(Adjacency::AddRemove),
            other => Err(Error::invalid(format!("unknown adjacency {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyParams {
    PureDp { epsilon: f64 },
    ApproxDp { epsilon: f64, delta: f64 },
    Rdp { alpha: f64, epsilon: f64 },
    Zcdp { rho: f64 },
}

impl PrivacyParams {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PrivacyParams::PureDp { epsilon } => epsilon >= 0.0,
            PrivacyParams::ApproxDp { epsilon, delta } => epsilon >= 0.0 && (0.0..=1.0).contains(&delta),
            PrivacyParams::Rdp { alpha, epsilon } => alpha > 1.0 && epsilon >= 0.0,
            PrivacyParams::Zcdp { rho } => rho >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid privacy parameters {self:?}")))
        }
    }
}

/// zCDP of `steps` Gaussian steps with clip `clip` and noise std
/// `noise_multiplier * clip`.
pub fn account_dpgd(steps: usize, clip: f64, noise_multiplier: f64, adjacency: Adjacency) -> Result<f64> {
    if !(noise_multiplier > 0.0) {
        return Err(Error::invalid("noise_multiplier must be > 0 (σ = 0 gives ρ = ∞)"));
    }
    if !(clip > 0.0) {
        return Err(Error::invalid("clip norm must be > 0"));
    }
    let delta = adjacency.sensitivity(clip);
    let std = noise_multiplier * clip;
    Ok(steps as f64 * delta * delta / (2.0 * std * std))
}

/// ρ-zCDP implies (α, αρ)-RDP.
pub fn zcdp_to_rdp(rho: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::invalid("alpha must exceed 1"));
    }
    Ok(alpha * rho)
}

/// ρ-zCDP implies (ρ + 2√(ρ ln(1/δ)), δ)-DP.
pub fn zcdp_to_approx_dp(rho: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta must lie in (0, 1)"));
    }
    if rho < 0.0 {
        return Err(Error::invalid("rho must be nonnegative"));
    }
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

/// ε of DP-GD at `noise_multiplier` (∞ when there is no noise).
pub fn dpgd_epsilon(steps: usize, clip: f64, noise_multiplier: f64, delta: f64, adjacency: Adjacency) -> Result<f64> {
    if noise_multiplier == 0.0 {
        return Ok(f64::INFINITY);
    }
    zcdp_to_approx_dp(account_dpgd(steps, clip, noise_multiplier, adjacency)?, delta)
}

/// Smallest noise multiplier whose (ε, δ) guarantee is at most `epsilon`,
/// by bisection to 1e-9 relative width.
pub fn calibrate_noise(epsilon: f64, delta: f64, steps: usize, clip: f64, adjacency: Adjacency) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("target epsilon must be finite and > 0"));
    }
    if steps == 0 {
        return Err(Error::invalid("no steps to calibrate for"));
    }
    let eps_at = |s: f64| dpgd_epsilon(steps, clip, s, delta, adjacency);
    let mut hi = 1.0;
    while eps_at(hi)? > epsilon {
        hi *= 2.0;
        if hi > 1e150 {
            return Err(Error::Numerical("target epsilon is unreachable".into()));
        }
    }
    let mut lo = hi / 2.0;
    while eps_at(lo)? <= epsilon {
        lo /= 2.0;
        if lo < 1e-150 {
            return Err(Error::Numerical("target epsilon is unreachable".into()));
        }
    }
    while (hi - lo) > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if eps_at(mid)? <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
