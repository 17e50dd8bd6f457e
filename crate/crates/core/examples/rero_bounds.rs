//! Reconstruction-robustness bounds for a few priors and privacy levels,
//! written as a CSV table.
//!
//! `cargo run --release --example rero_bounds -- [out.csv]`

use reconlab::accounting::PrivacyParams;
use reconlab::rero::{kappa_uniform_ball, prop_gamma, puredp_to_rero, rdp_to_rero, rero_to_dp, write_bound_table, zcdp_to_rero, BoundRow, HighDimPrior};

fn main() -> reconlab::Result<()> {
    let kappa = 0.01;
    println!("κ = {kappa}");
    for eps in [0.5, 1.0, std::f64::consts::LN_10, 5.0] {
        let pure = puredp_to_rero(eps, kappa, 0.0)?;
        let rdp = rdp_to_rero(8.0, eps, kappa, 0.0)?;
        println!("ε = {eps:<8} pure γ = {:.4}   rdp(α=8) γ = {:.4}", pure.gamma, rdp.gamma);
    }
    for rho in [0.01, 0.1, 1.0] {
        println!("ρ = {rho:<5} zcdp γ = {:.4}", zcdp_to_rero(rho, kappa, 0.0)?.gamma);
    }
    println!("γ = 0.75 at ε = 0 gives δ = {}", rero_to_dp(0.0, 0.75)?);

    let mut rows = Vec::new();
    for d in [2, 8, 32, 128] {
        let eta = 0.9;
        let ball = kappa_uniform_ball(eta, d)?;
        for rho in [0.1, 1.0] {
            let privacy = PrivacyParams::Zcdp { rho };
            for (name, prior) in [("uniform_ball", HighDimPrior::UniformBall { eta }), ("gaussian", HighDimPrior::Gaussian { eta: 0.25 * (d as f64).sqrt(), sigma: 1.0 })] {
                let bound = prop_gamma(d, privacy, prior)?;
                rows.push(BoundRow { dim: d, prior: name.into(), privacy, bound });
            }
        }
        println!("d = {d:<4} κ_ball(η=0.9) = {:.3e}", ball.kappa);
    }
    let path = std::env::args().nth(1).unwrap_or_else(|| "rero_bounds.csv".into());
    write_bound_table(&rows, Some("high-dimensional priors"), &path)?;
    println!("wrote {} rows to {path}", rows.len());
    Ok(())
}
