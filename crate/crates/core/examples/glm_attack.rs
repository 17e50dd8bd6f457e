//! Closed-form reconstruction of the one unknown row of a GLM training set,
//! for each family, plus the two-root no-intercept least squares variant.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use reconlab::glm::{fit_glm, reconstruct_glm, reconstruct_linreg_no_intercept, GlmFamily, GlmSpec, RegressionData, DEFAULT_FIT_TOL};
use reconlab::rng::Rng;

fn gauss(rng: &mut impl rand::Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

fn planted(family: GlmFamily, n: usize, d: usize, seed: u64) -> (RegressionData, Vec<f64>, f64) {
    let mut rng = Rng::new(seed).stream();
    let w: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
    let mut row = || {
        let x: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
        let eta: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        let y = match family {
            GlmFamily::Logistic => f64::from(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()))),
            _ => eta + 0.1 * gauss(&mut rng),
        };
        (x, y)
    };
    let rows: Vec<_> = (0..n).map(|_| row()).collect();
    let (tx, ty) = row();
    let data = RegressionData::new(rows.iter().map(|r| r.0.clone()).collect(), rows.iter().map(|r| r.1).collect()).unwrap();
    (data, tx, ty)
}

fn main() -> reconlab::Result<()> {
    let cases = [(GlmFamily::Linear, 0.0), (GlmFamily::Ridge, 1.0), (GlmFamily::Logistic, 0.1)];
    for (i, (family, lambda)) in cases.into_iter().enumerate() {
        let (fixed, tx, ty) = planted(family, 200, 8, i as u64);
        let spec = GlmSpec::new(family, lambda, true);
        let params = fit_glm(&fixed.with_point(&tx, ty), &spec, DEFAULT_FIT_TOL)?;
        let rec = reconstruct_glm(&params, &fixed, &spec, DEFAULT_FIT_TOL)?;
        let err = rec.x[1..].iter().zip(&tx).map(|(a, b)| (a - b).abs()).fold((rec.y - ty).abs(), f64::max);
        println!("{family:?} λ={lambda}: max abs error {err:.2e}, label {:.4} (true {ty:.4})", rec.y);
    }

    let (fixed, tx, ty) = planted(GlmFamily::Linear, 50, 4, 9);
    let spec = GlmSpec::new(GlmFamily::Linear, 0.0, false);
    let params = fit_glm(&fixed.with_point(&tx, ty), &spec, DEFAULT_FIT_TOL)?;
    let roots = reconstruct_linreg_no_intercept(&params.theta, &fixed, ty)?;
    for (name, r) in ["+", "-"].iter().zip(&roots) {
        let err = r.iter().zip(&tx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("no intercept, root {name}: max abs error {err:.2e}");
    }
    Ok(())
}
