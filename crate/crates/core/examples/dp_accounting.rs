//! ε for noisy full-batch gradient descent and the inverse calibration.

use reconlab::accounting::{calibrate_noise, dpgd_epsilon, Adjacency};

fn main() -> reconlab::Result<()> {
    let (steps, clip, delta) = (50, 1.0, 1e-5);
    for adjacency in [Adjacency::Replace, Adjacency::AddRemove] {
        println!("{adjacency:?}");
        for sigma in [0.5, 1.0, 2.0, 8.0, 32.0] {
            println!("  σ = {sigma:<5} ε = {:.3}", dpgd_epsilon(steps, clip, sigma, delta, adjacency)?);
        }
        for eps in [1000.0, 100.0, 10.0, 1.0] {
            let sigma = calibrate_noise(eps, delta, steps, clip, adjacency)?;
            println!("  target ε = {eps:<6} σ = {sigma:.4}  back to ε = {:.6}", dpgd_epsilon(steps, clip, sigma, delta, adjacency)?);
        }
    }
    Ok(())
}
