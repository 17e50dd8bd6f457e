//! Checks the zCDP bound against a MAP attacker on the Gaussian mean
//! release, over a small grid of noise levels, radii and priors.

use reconlab::rero::soundness_suite;

fn main() -> reconlab::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let rows = soundness_suite(&[0.1, 0.5, 2.0], &[0.05, 0.2, 0.4], 9, trials, 1)?;
    println!("{:<10} {:>5} {:>5} {:>7} {:>7} {:>7}", "prior", "rho", "eta", "kappa", "gamma", "rate");
    for r in &rows {
        println!("{:<10} {:>5} {:>5} {:>7.4} {:>7.4} {:>7.4}{}", r.prior, r.rho, r.eta, r.kappa, r.gamma, r.rate.estimate, if r.sound() { "" } else { "  VIOLATION" });
    }
    Ok(())
}
