//! Generalized linear models fitted to optimality, and the closed-form
//! attacks that invert their optimality conditions.
//!
//! Objective (canonical link `g`, `b' = g⁻¹`):
//!
//! ```text
//! C(θ) = Σ_i [ b(⟨x_i, θ⟩) − y_i ⟨x_i, θ⟩ ] + (λ/2) ‖θ‖²
//! ∇C(θ) = Σ_i x_i (g⁻¹(⟨x_i, θ⟩) − y_i) + λ θ
//! ```
//!
//! At the optimum every training point contributes one term to `∇C = 0`.
//! An adversary who knows all points but one can compute every other term
//! and solve for the remaining one.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::nn::sigmoid;

pub const DEFAULT_FIT_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 100;
/// Below this magnitude the intercept equation cannot be divided by.
pub const DENOMINATOR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GlmFamily {
    Linear,
    Ridge,
    Logistic,
}

impl GlmFamily {
    /// Inverse link `g⁻¹ = b'`.
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            GlmFamily::Linear | GlmFamily::Ridge => eta,
            GlmFamily::Logistic => sigmoid(eta),
        }
    }

    /// Cumulant `b`.
    pub fn cumulant(self, eta: f64) -> f64 {
        match self {
            GlmFamily::Linear | GlmFamily::Ridge => 0.5 * eta * eta,
            GlmFamily::Logistic => eta.max(0.0) + (-eta.abs()).exp().ln_1p(),
        }
    }

    /// `b''`, the variance function.
    pub fn variance(self, eta: f64) -> f64 {
        match self {
            GlmFamily::Linear | GlmFamily::Ridge => 1.0,
            GlmFamily::Logistic => {
                let s = sigmoid(eta);
                s * (1.0 - s)
            }
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(GlmFamily::Linear),
            "ridge" => Ok(GlmFamily::Ridge),
            "logistic" => Ok(GlmFamily::Logistic),
            other => Err(Error::invalid(format!("unknown GLM family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmSpec {
    pub family: GlmFamily,
    pub lambda: f64,
    pub intercept: bool,
}

impl GlmSpec {
    pub fn new(family: GlmFamily, lambda: f64, intercept: bool) -> Self {
        Self {
            family,
            lambda,
            intercept,
        }
    }
}

/// Rows of real features with real-valued labels (`{0, 1}` for logistic).
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl RegressionData {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
        if let Some(first) = x.first() {
            if let Some(bad) = x.iter().find(|r| r.len() != first.len()) {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    actual: bad.len(),
                });
            }
        }
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.x.first().map(Vec::len)
    }

    pub fn has_intercept_column(&self) -> bool {
        !self.x.is_empty() && self.x.iter().all(|r| r.first() == Some(&1.0))
    }

    /// Prepends a constant-1 feature to every row.
    pub fn with_intercept(&self) -> Self {
        Self {
            x: self
                .x
                .iter()
                .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
                .collect(),
            y: self.y.clone(),
        }
    }

    /// `self ∪ {(x, y)}`, appended last.
    pub fn with_point(&self, x: &[f64], y: f64) -> Self {
        let mut out = self.clone();
        out.x.push(x.to_vec());
        out.y.push(y);
        out
    }
}

/// Fitted coefficients; with an intercept the first coordinate is its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmParams {
    pub theta: Vec<f64>,
    pub intercept: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `Σ x_i (g⁻¹(⟨x_i, θ⟩) − y_i)`, without the regularizer.
fn data_gradient(data: &RegressionData, theta: &[f64], family: GlmFamily) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    for (x, &y) in data.x.iter().zip(&data.y) {
        let r = family.mean(dot(x, theta)) - y;
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += xj * r;
        }
    }
    g
}

/// Full objective gradient `∇C(θ)`.
pub fn objective_gradient(data: &RegressionData, theta: &[f64], spec: &GlmSpec) -> Vec<f64> {
    let mut g = data_gradient(data, theta, spec.family);
    for (gj, tj) in g.iter_mut().zip(theta) {
        *gj += spec.lambda * tj;
    }
    g
}

pub fn objective(data: &RegressionData, theta: &[f64], spec: &GlmSpec) -> f64 {
    let fit: f64 = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(x, &y)| {
            let eta = dot(x, theta);
            spec.family.cumulant(eta) - y * eta
        })
        .sum();
    fit + 0.5 * spec.lambda * dot(theta, theta)
}

fn hessian(data: &RegressionData, theta: &[f64], spec: &GlmSpec) -> DMatrix<f64> {
    let d = theta.len();
    let mut h = DMatrix::<f64>::zeros(d, d);
    for x in &data.x {
        let w = spec.family.variance(dot(x, theta));
        for i in 0..d {
            let wi = w * x[i];
            for j in 0..=i {
                h[(i, j)] += wi * x[j];
            }
        }
    }
    for i in 0..d {
        h[(i, i)] += spec.lambda;
        for j in 0..i {
            h[(j, i)] = h[(i, j)];
        }
    }
    h
}

fn prepare(data: &RegressionData, spec: &GlmSpec) -> Result<RegressionData> {
    if data.is_empty() {
        return Err(Error::Empty("GLM training set".into()));
    }
    if spec.lambda < 0.0 || !spec.lambda.is_finite() {
        return Err(Error::invalid("lambda must be finite and nonnegative"));
    }
    if spec.family == GlmFamily::Logistic && data.y.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::invalid("logistic labels must be 0 or 1"));
    }
    Ok(if spec.intercept && !data.has_intercept_column() {
        data.with_intercept()
    } else {
        data.clone()
    })
}

/// Fits the GLM with damped Newton steps until `‖∇C‖ ≤ tol`.
///
/// For the quadratic families the first step from zero is the
/// normal-equation solution; later steps are refinement. After the
/// tolerance is met, up to two more steps polish the solution as long as
/// they keep reducing the gradient.
pub fn fit_glm(data: &RegressionData, spec: &GlmSpec, tol: f64) -> Result<GlmParams> {
    let data = prepare(data, spec)?;
    let d = data.dim().unwrap_or(0);
    let mut theta = vec![0.0; d];
    let mut grad = objective_gradient(&data, &theta, spec);
    let mut gnorm = norm(&grad);
    let mut polish = 0;

    for _ in 0..NEWTON_MAX_ITER {
        if gnorm <= tol {
            polish += 1;
            if polish > 2 {
                break;
            }
        }
        let h = hessian(&data, &theta, spec);
        let step = h
            .clone()
            .cholesky()
            .map(|c| c.solve(&DVector::from_column_slice(&grad)))
            .or_else(|| h.lu().solve(&DVector::from_column_slice(&grad)))
            .ok_or_else(|| Error::Numerical("singular Hessian: design is rank-deficient".into()))?;

        // Backtrack on the objective when a full step overshoots.
        let current = objective(&data, &theta, spec);
        let mut t = 1.0;
        let mut candidate: Vec<f64>;
        loop {
            candidate = theta.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let value = objective(&data, &candidate, spec);
            if value <= current + 1e-12 * current.abs().max(1.0) || t < 1e-8 {
                break;
            }
            t *= 0.5;
        }
        let cand_grad = objective_gradient(&data, &candidate, spec);
        let cand_norm = norm(&cand_grad);
        if !cand_norm.is_finite() {
            return Err(Error::Numerical("non-finite gradient during Newton".into()));
        }
        if gnorm <= tol && cand_norm >= gnorm {
            break;
        }
        theta = candidate;
        grad = cand_grad;
        gnorm = cand_norm;
    }
    if gnorm > tol {
        return Err(Error::Numerical(format!(
            "Newton did not reach ‖∇C‖ ≤ {tol:e} in {NEWTON_MAX_ITER} iterations (got {gnorm:e})"
        )));
    }
    Ok(GlmParams {
        theta,
        intercept: spec.intercept,
    })
}

/// Plain gradient descent with step `1/L`, `L` bounding the Hessian.
/// Slow; exists to show the attack does not care how θ was reached.
pub fn fit_glm_gradient_descent(data: &RegressionData, spec: &GlmSpec, tol: f64, max_iter: usize) -> Result<GlmParams> {
    let data = prepare(data, spec)?;
    let d = data.dim().unwrap_or(0);
    let curvature = match spec.family {
        GlmFamily::Logistic => 0.25,
        _ => 1.0,
    };
    // Largest eigenvalue of the data Gram matrix times the curvature bound.
    let zero = vec![0.0; d];
    let gram = hessian(&data, &zero, &GlmSpec::new(GlmFamily::Linear, 0.0, spec.intercept));
    let lmax = gram.symmetric_eigenvalues().max();
    let step = 1.0 / (curvature * lmax + spec.lambda);
    let mut theta = zero;
    for _ in 0..max_iter {
        let g = objective_gradient(&data, &theta, spec);
        if norm(&g) <= tol {
            return Ok(GlmParams {
                theta,
                intercept: spec.intercept,
            });
        }
        for (t, gj) in theta.iter_mut().zip(&g) {
            *t -= step * gj;
        }
    }
    Err(Error::Numerical("gradient descent did not converge".into()))
}

/// The right-hand side of the optimality equation for the missing point:
/// `−Σ_{D−} x (g⁻¹(⟨x, θ⟩) − y) − λθ`. At an exact optimum this equals the
/// missing point's own term `x (g⁻¹(⟨x, θ⟩) − y)`.
pub fn residual_system(params: &GlmParams, fixed: &RegressionData, spec: &GlmSpec) -> Result<Vec<f64>> {
    let fixed = fixed_design(params, fixed, spec)?;
    let mut r = data_gradient(&fixed, &params.theta, spec.family);
    for (rj, tj) in r.iter_mut().zip(&params.theta) {
        *rj = -(*rj + spec.lambda * tj);
    }
    Ok(r)
}

fn fixed_design(params: &GlmParams, fixed: &RegressionData, spec: &GlmSpec) -> Result<RegressionData> {
    let d = params.theta.len();
    if fixed.is_empty() {
        return Ok(RegressionData {
            x: Vec::new(),
            y: Vec::new(),
        });
    }
    let fixed = if spec.intercept && !fixed.has_intercept_column() {
        fixed.with_intercept()
    } else {
        fixed.clone()
    };
    match fixed.dim() {
        Some(k) if k == d => Ok(fixed),
        Some(k) => Err(Error::DimensionMismatch {
            expected: d,
            actual: k,
        }),
        None => Ok(fixed),
    }
}

/// Which label expression produced the returned reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelRule {
    /// `y = g⁻¹(⟨x,θ⟩) + λ (X̄₁ᵀB) θ₁`
    Printed,
    /// `y = g⁻¹(⟨x,θ⟩) − (X̄₁ᵀB + λθ₁)`
    SketchSign,
    /// `y = g⁻¹(⟨x,θ⟩) + X̄₁ᵀB + λθ₁`
    Derived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmReconstruction {
    /// Features including the leading intercept coordinate (exactly 1).
    pub x: Vec<f64>,
    pub y: f64,
    pub rule: LabelRule,
    /// `‖∇C(θ)‖` over `D− ∪ {(x, y)}`.
    pub optimality_residual: f64,
}

/// Closed-form reconstruction of the missing point for a GLM with
/// intercept:
///
/// ```text
/// B = g⁻¹(X̄θ) − Ȳ
/// x = (X̄ᵀB + λθ) / (X̄₁ᵀB + λθ₁)
/// ```
///
/// The label is recovered from the intercept equation. Several algebraic
/// forms of that equation are in circulation; each is evaluated and the one
/// whose `(x, y)` makes `∇C(θ)` vanish when substituted back is returned.
pub fn reconstruct_glm(params: &GlmParams, fixed: &RegressionData, spec: &GlmSpec, tol: f64) -> Result<GlmReconstruction> {
    if !spec.intercept || !params.intercept {
        return Err(Error::invalid("the closed-form GLM attack needs an intercept"));
    }
    let fixed = fixed_design(params, fixed, spec)?;
    let theta = &params.theta;
    let lambda = spec.lambda;

    let b_fixed = data_gradient(&fixed, theta, spec.family);
    // X̄₁ is the all-ones column, so X̄₁ᵀB is the first entry of X̄ᵀB.
    let x1_b = b_fixed[0];
    let numerator: Vec<f64> = b_fixed.iter().zip(theta).map(|(b, t)| b + lambda * t).collect();
    let denominator = x1_b + lambda * theta[0];
    if denominator.abs() < DENOMINATOR_EPS {
        return Err(Error::Numerical(format!(
            "intercept equation is degenerate (|X̄₁ᵀB + λθ₁| = {:e})",
            denominator.abs()
        )));
    }
    let mut x: Vec<f64> = numerator.iter().map(|v| v / denominator).collect();
    x[0] = 1.0;

    let mean = spec.family.mean(dot(&x, theta));
    let candidates = [
        (LabelRule::Derived, mean + x1_b + lambda * theta[0]),
        (LabelRule::SketchSign, mean - (x1_b + lambda * theta[0])),
        (LabelRule::Printed, mean + lambda * x1_b * theta[0]),
    ];

    let mut best: Option<GlmReconstruction> = None;
    for (rule, y) in candidates {
        let full = fixed.with_point(&x, y);
        let res = norm(&objective_gradient(&full, theta, spec));
        if best.as_ref().is_none_or(|b| res < b.optimality_residual) {
            best = Some(GlmReconstruction {
                x: x.clone(),
                y,
                rule,
                optimality_residual: res,
            });
        }
    }
    let best = best.expect("three candidates");
    if !(best.optimality_residual <= 10.0 * tol) {
        return Err(Error::Numerical(format!(
            "no label candidate satisfies optimality (best residual {:e})",
            best.optimality_residual
        )));
    }
    Ok(best)
}

/// Reconstruction for least squares without intercept when the target's
/// label `y` is known. Returns the `+` and `−` roots of
/// `α² (rᵀX̄θ) − α y + 1 = 0` times `X̄ᵀ r`, with `r = X̄θ − Ȳ`.
pub fn reconstruct_linreg_no_intercept(theta: &[f64], fixed: &RegressionData, y: f64) -> Result<[Vec<f64>; 2]> {
    if let Some(d) = fixed.dim() {
        if d != theta.len() {
            return Err(Error::DimensionMismatch {
                expected: theta.len(),
                actual: d,
            });
        }
    }
    let predictions: Vec<f64> = fixed.x.iter().map(|x| dot(x, theta)).collect();
    let r: Vec<f64> = predictions.iter().zip(&fixed.y).map(|(p, t)| p - t).collect();
    if r.iter().all(|&v| v == 0.0) {
        return Err(Error::Numerical("fixed-set residual X̄θ − Ȳ is zero".into()));
    }
    let mut direction = vec![0.0; theta.len()];
    for (x, ri) in fixed.x.iter().zip(&r) {
        for (dj, xj) in direction.iter_mut().zip(x) {
            *dj += xj * ri;
        }
    }
    let q = dot(&r, &predictions);
    let disc = y * y - 4.0 * q;
    if disc < 0.0 {
        return Err(Error::Numerical(format!("negative discriminant {disc:e}")));
    }
    // Cancellation-free roots: t/(2q) and 2/t share the product 1/q.
    let sqrt_disc = disc.sqrt();
    let t = if y >= 0.0 { y + sqrt_disc } else { y - sqrt_disc };
    if t == 0.0 {
        return Err(Error::Numerical("both label and discriminant vanish".into()));
    }
    let far = if q != 0.0 { t / (2.0 * q) } else { f64::INFINITY };
    let near = 2.0 / t;
    let (plus, minus) = if y >= 0.0 { (far, near) } else { (near, far) };
    let scale = |a: f64| direction.iter().map(|d| a * d).collect::<Vec<f64>>();
    Ok([scale(plus), scale(minus)])
}

/// Reads a regression CSV with a header row; `label_column` holds real
/// labels, every other column is a feature.
pub fn load_regression_csv(path: impl AsRef<Path>, label_column: &str) -> Result<RegressionData> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::format(path, format!("no column named {label_column:?}")))?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let mut x = Vec::with_capacity(headers.len() - 1);
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::format(path, format!("non-numeric cell {cell:?} on row {}", line + 2)))?;
            if j == label_idx {
                ys.push(v);
            } else {
                x.push(v);
            }
        }
        xs.push(x);
    }
    if xs.is_empty() {
        return Err(Error::Empty(format!("{} has no data rows", path.display())));
    }
    RegressionData::new(xs, ys)
}

/// Writes `x0,...,x{d-1},y` with a header row.
pub fn write_regression_csv(data: &RegressionData, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let d = data.dim().unwrap_or(0);
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (x, y) in data.x.iter().zip(&data.y) {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(y.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_rows(n: usize, d: usize, rng: &mut impl rand::Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
            .collect()
    }

    /// Direct normal-equation oracle for ridge with intercept column.
    fn ridge_oracle(data: &RegressionData, lambda: f64) -> Vec<f64> {
        let d = data.x[0].len();
        let mut a = DMatrix::<f64>::zeros(d, d);
        let mut b = DVector::<f64>::zeros(d);
        for (x, y) in data.x.iter().zip(&data.y) {
            for i in 0..d {
                b[i] += x[i] * y;
                for j in 0..d {
                    a[(i, j)] += x[i] * x[j];
                }
            }
        }
        for i in 0..d {
            a[(i, i)] += lambda;
        }
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    #[test]
    fn ridge_matches_normal_equations() {
        let mut rng = Rng::new(1).stream();
        let x = gaussian_rows(40, 4, &mut rng);
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = RegressionData::new(x, y).unwrap();
        let spec = GlmSpec::new(GlmFamily::Ridge, 1.0, true);
        let fit = fit_glm(&data, &spec, DEFAULT_FIT_TOL).unwrap();
        let oracle = ridge_oracle(&data.with_intercept(), 1.0);
        for (a, b) in fit.theta.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_labels_give_zero_ridge() {
        let mut rng = Rng::new(2).stream();
        let data = RegressionData::new(gaussian_rows(10, 3, &mut rng), vec![0.0; 10]).unwrap();
        let fit = fit_glm(&data, &GlmSpec::new(GlmFamily::Ridge, 0.5, true), DEFAULT_FIT_TOL).unwrap();
        assert!(fit.theta.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn logistic_on_separable_data_with_ridge_converges() {
        let mut rng = Rng::new(3).stream();
        let x = gaussian_rows(60, 3, &mut rng);
        let y: Vec<f64> = x.iter().map(|r| if r[0] > 0.0 { 1.0 } else { 0.0 }).collect();
        let data = RegressionData::new(x, y).unwrap();
        let spec = GlmSpec::new(GlmFamily::Logistic, 0.1, true);
        let fit = fit_glm(&data, &spec, DEFAULT_FIT_TOL).unwrap();
        assert!(fit.theta.iter().all(|t| t.is_finite()));
        let g = objective_gradient(&data.with_intercept(), &fit.theta, &spec);
        assert!(norm(&g) <= 1e-10);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let x = vec![vec![1.0, 2.0]; 5];
        let data = RegressionData::new(x, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let err = fit_glm(&data, &GlmSpec::new(GlmFamily::Linear, 0.0, false), DEFAULT_FIT_TOL).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    struct Planted {
        fixed: RegressionData,
        x: Vec<f64>,
        y: f64,
        params: GlmParams,
        spec: GlmSpec,
    }

    fn plant(family: GlmFamily, lambda: f64, n: usize, d: usize, seed: u64) -> Planted {
        let mut rng = Rng::new(seed).stream();
        let w: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = gaussian_rows(n, d, &mut rng)
            .into_iter()
            .map(|r| std::iter::once(1.0).chain(r).collect())
            .collect();
        let ys: Vec<f64> = rows
            .iter()
            .map(|x| {
                let eta = dot(x, &w);
                match family {
                    GlmFamily::Logistic => f64::from(rng.random_bool(sigmoid(eta))),
                    _ => eta + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng),
                }
            })
            .collect();
        let fixed = RegressionData::new(rows[1..].to_vec(), ys[1..].to_vec()).unwrap();
        let spec = GlmSpec::new(family, lambda, true);
        let full = fixed.with_point(&rows[0], ys[0]);
        let params = fit_glm(&full, &spec, DEFAULT_FIT_TOL).unwrap();
        Planted {
            fixed,
            x: rows[0].clone(),
            y: ys[0],
            params,
            spec,
        }
    }

    #[test]
    fn linear_round_trip() {
        let p = plant(GlmFamily::Linear, 0.0, 50, 5, 10);
        let rec = reconstruct_glm(&p.params, &p.fixed, &p.spec, DEFAULT_FIT_TOL).unwrap();
        assert_eq!(rec.x[0], 1.0);
        for (a, b) in rec.x.iter().zip(&p.x) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert!((rec.y - p.y).abs() <= 1e-6);
        assert_eq!(rec.rule, LabelRule::Derived);
    }

    #[test]
    fn logistic_round_trip() {
        let p = plant(GlmFamily::Logistic, 0.1, 300, 10, 11);
        let rec = reconstruct_glm(&p.params, &p.fixed, &p.spec, DEFAULT_FIT_TOL).unwrap();
        for (a, b) in rec.x.iter().zip(&p.x) {
            assert!((a - b).abs() <= 1e-6);
        }
        assert!((rec.y - p.y).abs() <= 1e-6);
    }

    #[test]
    fn residual_system_identities() {
        let p = plant(GlmFamily::Linear, 0.0, 50, 4, 12);
        let r = residual_system(&p.params, &p.fixed, &p.spec).unwrap();
        let s = dot(&p.x, &p.params.theta) - p.y;
        for (rj, xj) in r.iter().zip(&p.x) {
            assert!((rj - xj * s).abs() <= 1e-8);
        }
        // residual + fixed-set gradient + λθ is the full gradient, ≈ 0.
        let ridge = plant(GlmFamily::Ridge, 1.0, 50, 4, 13);
        let r = residual_system(&ridge.params, &ridge.fixed, &ridge.spec).unwrap();
        let fixed_grad = data_gradient(&ridge.fixed, &ridge.params.theta, GlmFamily::Ridge);
        let total: Vec<f64> = r
            .iter()
            .zip(&fixed_grad)
            .zip(&ridge.params.theta)
            .map(|((a, b), t)| a + b + t)
            .collect();
        assert!(norm(&total) <= 1e-10);

        let empty = RegressionData::new(vec![], vec![]).unwrap();
        let spec = GlmSpec::new(GlmFamily::Ridge, 0.0, false);
        let params = GlmParams {
            theta: vec![0.3, -0.2],
            intercept: false,
        };
        assert_eq!(residual_system(&params, &empty, &spec).unwrap(), vec![-0.0, 0.0]);
    }

    #[test]
    fn attack_is_independent_of_the_optimizer() {
        let p = plant(GlmFamily::Ridge, 0.5, 80, 3, 14);
        let full = p.fixed.with_point(&p.x, p.y);
        let gd = fit_glm_gradient_descent(&full, &p.spec, DEFAULT_FIT_TOL, 1_000_000).unwrap();
        let a = reconstruct_glm(&p.params, &p.fixed, &p.spec, DEFAULT_FIT_TOL).unwrap();
        let b = reconstruct_glm(&gd, &p.fixed, &p.spec, DEFAULT_FIT_TOL).unwrap();
        for (u, v) in a.x.iter().zip(&b.x) {
            assert!((u - v).abs() <= 1e-5);
        }
        assert!((a.y - b.y).abs() <= 1e-5);
    }

    #[test]
    fn degenerate_intercept_equation_is_rejected() {
        // θ = 0 with zero fixed labels: B = 0 and λθ₁ = 0.
        let fixed = RegressionData::new(vec![vec![1.0, 2.0], vec![1.0, -1.0]], vec![0.0, 0.0]).unwrap();
        let params = GlmParams {
            theta: vec![0.0, 0.0],
            intercept: true,
        };
        let spec = GlmSpec::new(GlmFamily::Linear, 0.0, true);
        assert!(matches!(
            reconstruct_glm(&params, &fixed, &spec, DEFAULT_FIT_TOL),
            Err(Error::Numerical(_))
        ));
    }

    fn plant_no_intercept(seed: u64, scale: f64) -> (Vec<f64>, RegressionData, Vec<f64>, f64) {
        let mut rng = Rng::new(seed).stream();
        let d = 5;
        let rows = gaussian_rows(40, d, &mut rng);
        let ys: Vec<f64> = rows.iter().map(|r| r[0] - r[1] + <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)).collect();
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
        let fixed = RegressionData::new(rows[1..].to_vec(), ys[1..].to_vec()).unwrap();
        let full = fixed.with_point(&rows[0], ys[0]);
        let fit = fit_glm(&full, &GlmSpec::new(GlmFamily::Linear, 0.0, false), DEFAULT_FIT_TOL).unwrap();
        (fit.theta, fixed, rows[0].clone(), ys[0])
    }

    #[test]
    fn no_intercept_round_trip_and_rescaling() {
        let (theta, fixed, x, y) = plant_no_intercept(20, 1.0);
        let cands = reconstruct_linreg_no_intercept(&theta, &fixed, y).unwrap();
        let best = cands
            .iter()
            .map(|c| c.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 1e-6, "best error {best}");

        let (theta3, fixed3, _, y3) = plant_no_intercept(20, 3.0);
        let scaled = reconstruct_linreg_no_intercept(&theta3, &fixed3, y3).unwrap();
        for (c, s) in cands.iter().zip(&scaled) {
            for (a, b) in c.iter().zip(s) {
                assert!((3.0 * a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn no_intercept_double_root_and_errors() {
        let fixed = RegressionData::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        let theta = vec![2.0, 0.0];
        // r = X̄θ = (2, 0), q = rᵀX̄θ = 4; y = 4 makes the discriminant 0.
        let y = 4.0;
        let [a, b] = reconstruct_linreg_no_intercept(&theta, &fixed, y).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-12);
        }
        assert!(reconstruct_linreg_no_intercept(&theta, &fixed, 1.0).is_err());
        let exact = RegressionData::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![2.0, 0.0]).unwrap();
        assert!(reconstruct_linreg_no_intercept(&theta, &exact, 10.0).is_err());
    }
}
