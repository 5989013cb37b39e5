//! Maximum-likelihood coefficients for a fixed permutation.
//!
//! The objective is separable across response columns, and each column is a
//! concave weighted GLM fit solved by damped Newton:
//! `g = Xᵀ(w∘(y − ψ′(Xb)))`, `H = XᵀDX` with `D = diag(w ψ″(Xb))`, step
//! `(H + ridge·I)s = g`, halved until the objective does not decrease.

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{Coefficients, Dataset, GlmFamily};
use crate::linalg::Cholesky;
use crate::permutation::Permutation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSettings {
    pub max_iterations: usize,
    /// Stop once `‖g‖∞` falls to this value.
    pub gradient_tolerance: f64,
    /// Maximum number of step halvings per iteration.
    pub max_halvings: usize,
    pub ridge: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            max_iterations: 100,
            gradient_tolerance: 1e-8,
            max_halvings: 40,
            ridge: 1e-10,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidSetting("max_iterations must be >= 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidSetting("gradient_tolerance must be > 0".into()));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::InvalidSetting("ridge must be >= 0".into()));
        }
        Ok(())
    }
}

/// Outcome of one column fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnFit {
    pub b: Array1<f64>,
    /// `‖g‖∞` at the returned coefficients.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Fitted means reproduce binary responses exactly: the MLE does not
    /// exist and `b` is only a finite point along a diverging path.
    pub separated: bool,
    /// No row carried weight; the column was skipped and `b` is zero.
    pub empty: bool,
    /// Objective value after each line-searched iterate, starting from the
    /// initial point. Final Newton steps whose predicted gain is below the
    /// objective's rounding resolution are taken without being recorded.
    pub objective_trace: Vec<f64>,
}

/// Fitted residuals below this count as an exact reproduction of binary data.
const SEPARATION_RESIDUAL: f64 = 1e-6;

/// `Σ_i w_i (y_i·x_iᵀb − ψ(x_iᵀb))`, skipping zero-weight rows.
pub fn column_objective(
    family: GlmFamily,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> f64 {
    objective_at(family, x.dot(&b).view(), y, weights)
}

/// Analytic gradient `Xᵀ(w∘(y − ψ′(Xb)))`.
pub fn column_gradient(
    family: GlmFamily,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Array1<f64> {
    gradient_at(family, x, x.dot(&b).view(), y, weights)
}

fn objective_at(family: GlmFamily, eta: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>) -> f64 {
    let mut total = 0.0;
    for i in 0..eta.len() {
        if w[i] != 0.0 {
            total += w[i] * (y[i] * eta[i] - family.psi(eta[i]));
        }
    }
    total
}

fn gradient_at(
    family: GlmFamily,
    x: ArrayView2<'_, f64>,
    eta: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
    w: ArrayView1<'_, f64>,
) -> Array1<f64> {
    let mut g = Array1::zeros(x.ncols());
    for i in 0..eta.len() {
        if w[i] != 0.0 {
            let r = w[i] * (y[i] - family.psi_prime(eta[i]));
            g.scaled_add(r, &x.row(i));
        }
    }
    g
}

fn negative_hessian(family: GlmFamily, x: ArrayView2<'_, f64>, eta: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>, ridge: f64) -> Array2<f64> {
    let p = x.ncols();
    let mut h = Array2::<f64>::zeros((p, p));
    for i in 0..eta.len() {
        if w[i] == 0.0 {
            continue;
        }
        let d = w[i] * family.psi_double_prime(eta[i]);
        let row = x.row(i);
        for a in 0..p {
            let da = d * row[a];
            for c in 0..=a {
                h[[a, c]] += da * row[c];
            }
        }
    }
    for a in 0..p {
        h[[a, a]] += ridge;
        for c in 0..a {
            h[[c, a]] = h[[a, c]];
        }
    }
    h
}

fn sup_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn check_column_inputs(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, weights: ArrayView1<'_, f64>) -> Result<()> {
    let n = x.nrows();
    for len in [y.len(), weights.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, actual: len });
        }
    }
    Ok(())
}

/// Fits one column from `b = 0`.
pub fn fit_column(
    family: GlmFamily,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
    settings: &NewtonSettings,
) -> Result<ColumnFit> {
    let init = Array1::zeros(x.ncols());
    fit_column_from(family, x, y, weights, settings, init.view())
}

/// Fits one column starting from `init`.
pub fn fit_column_from(
    family: GlmFamily,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    weights: ArrayView1<'_, f64>,
    settings: &NewtonSettings,
    init: ArrayView1<'_, f64>,
) -> Result<ColumnFit> {
    check_column_inputs(x, y, weights)?;
    if init.len() != x.ncols() {
        return Err(Error::LengthMismatch {
            expected: x.ncols(),
            actual: init.len(),
        });
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Ok(ColumnFit {
            b: Array1::zeros(x.ncols()),
            gradient_norm: 0.0,
            iterations: 0,
            converged: true,
            separated: false,
            empty: true,
            objective_trace: vec![0.0],
        });
    }

    let mut b = init.to_owned();
    let mut eta = x.dot(&b);
    let mut objective = objective_at(family, eta.view(), y, weights);
    if !objective.is_finite() {
        // A wild warm start (e.g. exp overflow); restart from the origin.
        b.fill(0.0);
        eta = x.dot(&b);
        objective = objective_at(family, eta.view(), y, weights);
    }
    let mut trace = vec![objective];
    let mut iterations = 0;
    let mut converged = false;
    let mut separated = false;
    let mut grad = gradient_at(family, x, eta.view(), y, weights);

    loop {
        if sup_norm(&grad) <= settings.gradient_tolerance {
            converged = true;
            break;
        }
        if family == GlmFamily::Bernoulli && reproduces_binary(family, eta.view(), y, weights) {
            separated = true;
            break;
        }
        if iterations >= settings.max_iterations {
            break;
        }
        let h = negative_hessian(family, x, eta.view(), weights, settings.ridge);
        let step = match Cholesky::new(h.view()) {
            Some(chol) => chol.solve(grad.view()),
            None => return Err(Error::SingularHessian),
        };
        // Close to the optimum the predicted gain drops below what the summed
        // objective can resolve; the line search would only see rounding noise.
        let gain = 0.5 * grad.dot(&step);
        if gain <= 64.0 * f64::EPSILON * (objective.abs() + 1.0) {
            iterations += 1;
            b += &step;
            eta = x.dot(&b);
            objective = objective_at(family, eta.view(), y, weights);
            grad = gradient_at(family, x, eta.view(), y, weights);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let candidate = &b + &(t * &step);
            let cand_eta = x.dot(&candidate);
            let cand_obj = objective_at(family, cand_eta.view(), y, weights);
            if cand_obj >= objective {
                accepted = Some((candidate, cand_eta, cand_obj));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((nb, ne, no)) => {
                b = nb;
                eta = ne;
                objective = no;
                trace.push(objective);
                grad = gradient_at(family, x, eta.view(), y, weights);
            }
            // No ascent along the Newton direction at machine precision.
            None => break,
        }
    }

    Ok(ColumnFit {
        gradient_norm: sup_norm(&grad),
        b,
        iterations,
        converged,
        separated,
        empty: false,
        objective_trace: trace,
    })
}

fn reproduces_binary(family: GlmFamily, eta: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>, w: ArrayView1<'_, f64>) -> bool {
    (0..eta.len())
        .filter(|&i| w[i] != 0.0)
        .all(|i| (y[i] - family.psi_prime(eta[i])).abs() < SEPARATION_RESIDUAL)
}

/// Coefficient matrix and per-column reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixFit {
    pub b: Coefficients,
    pub columns: Vec<ColumnFit>,
}

impl MatrixFit {
    pub fn converged(&self) -> bool {
        self.columns.iter().all(|c| c.converged)
    }
}

/// Maximizes `L(perm, B)` over `B`, column by column: design rows reordered
/// by `perm`, weights from the mask column.
pub fn fit_matrix(family: GlmFamily, data: &Dataset, perm: &Permutation, settings: &NewtonSettings) -> Result<MatrixFit> {
    fit_matrix_from(family, data, perm, settings, None)
}

pub fn fit_matrix_from(
    family: GlmFamily,
    data: &Dataset,
    perm: &Permutation,
    settings: &NewtonSettings,
    init: Option<ArrayView2<'_, f64>>,
) -> Result<MatrixFit> {
    let (p, m) = (data.p(), data.m());
    if let Some(init) = init {
        if init.dim() != (p, m) {
            return Err(Error::ShapeMismatch {
                context: "initial coefficients",
                expected: (p, m),
                actual: init.dim(),
            });
        }
    }
    let design = perm.try_apply_rows(data.x())?;
    let ones = Array1::ones(data.n());
    let y = data.y();
    let columns: Vec<ColumnFit> = (0..m)
        .into_par_iter()
        .map(|l| {
            let w = match data.mask() {
                Some(mask) => mask.column(l).to_owned(),
                None => ones.clone(),
            };
            let start = match init {
                Some(init) => init.column(l).to_owned(),
                None => Array1::zeros(p),
            };
            fit_column_from(family, design.view(), y.column(l), w.view(), settings, start.view())
                .map_err(|e| e.in_column(l))
        })
        .collect::<Result<_>>()?;
    let mut b = Array2::zeros((p, m));
    for (l, col) in columns.iter().enumerate() {
        if col.empty {
            warn!("response column {l} has no observed entries; dropped from the fit");
        }
        b.column_mut(l).assign(&col.b);
    }
    Ok(MatrixFit { b, columns })
}

/// `B(Π) = argmax_B Λ(Π, B)`: the same Newton solver with the pseudo-responses
/// `ψ′(Π♯XB♯)` in place of `Y`.
pub fn population_fit(
    family: GlmFamily,
    x: ArrayView2<'_, f64>,
    perm: &Permutation,
    truth_perm: &Permutation,
    truth_b: ArrayView2<'_, f64>,
    settings: &NewtonSettings,
) -> Result<Coefficients> {
    if truth_b.nrows() != x.ncols() {
        return Err(Error::ShapeMismatch {
            context: "coefficients",
            expected: (x.ncols(), truth_b.ncols()),
            actual: truth_b.dim(),
        });
    }
    let means = truth_perm
        .try_apply_rows(x.dot(&truth_b).view())?
        .mapv(|v| family.psi_prime(v));
    let design = perm.try_apply_rows(x)?;
    let ones = Array1::ones(x.nrows());
    let cols: Vec<Array1<f64>> = means
        .axis_iter(Axis(1))
        .into_par_iter()
        .enumerate()
        .map(|(l, y)| {
            fit_column(family, design.view(), y, ones.view(), settings)
                .map(|f| f.b)
                .map_err(|e| e.in_column(l))
        })
        .collect::<Result<_>>()?;
    let mut b = Array2::zeros(truth_b.raw_dim());
    for (l, c) in cols.into_iter().enumerate() {
        b.column_mut(l).assign(&c);
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::sample_responses;
    use crate::likelihood::population_likelihood;
    use crate::permutation::{all_permutations, random_with_displacement};
    use crate::random::seeded_rng;
    use nalgebra::{DMatrix, DVector};
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_matrix(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.sample::<f64, _>(StandardNormal) * scale)
    }

    fn ols(x: &Array2<f64>, y: ArrayView1<'_, f64>) -> Array1<f64> {
        let xm = DMatrix::from_row_iterator(x.nrows(), x.ncols(), x.iter().copied());
        let yv = DVector::from_iterator(y.len(), y.iter().copied());
        let sol = (xm.transpose() * &xm).lu().solve(&(xm.transpose() * yv)).unwrap();
        Array1::from_iter(sol.iter().copied())
    }

    #[test]
    fn gaussian_fit_is_least_squares() {
        let mut rng = seeded_rng(1);
        for _ in 0..10 {
            let x = normal_matrix(&mut rng, 80, 4, 1.0);
            let y = Array1::from_shape_fn(80, |_| rng.sample::<f64, _>(StandardNormal) * 2.0 + 1.0);
            let w = Array1::ones(80);
            let fit = fit_column(GlmFamily::Gaussian, x.view(), y.view(), w.view(), &NewtonSettings::default()).unwrap();
            let expect = ols(&x, y.view());
            assert!(fit.converged);
            for (a, b) in fit.b.iter().zip(expect.iter()) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn poisson_constant_response() {
        let x = Array2::ones((30, 1));
        for c in [0.5, 2.0, 7.0] {
            let y = Array1::from_elem(30, c);
            let fit = fit_column(GlmFamily::Poisson, x.view(), y.view(), Array1::ones(30).view(), &NewtonSettings::default()).unwrap();
            assert!(fit.converged);
            assert!((fit.b[0] - f64::ln(c)).abs() < 1e-9);
        }
    }

    #[test]
    fn separated_bernoulli_is_reported() {
        let x = array![[1.0, -2.0], [1.0, -1.0], [1.0, -0.5], [1.0, 0.5], [1.0, 1.0], [1.0, 2.0]];
        let y = array![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let fit = fit_column(GlmFamily::Bernoulli, x.view(), y.view(), Array1::ones(6).view(), &NewtonSettings::default()).unwrap();
        assert!(!fit.converged);
        assert!(fit.separated);
        assert!(fit.b.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rank_deficient_design_is_singular() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let y = array![1.0, 2.0, 3.5];
        let settings = NewtonSettings { ridge: 0.0, ..Default::default() };
        assert_eq!(
            fit_column(GlmFamily::Gaussian, x.view(), y.view(), Array1::ones(3).view(), &settings),
            Err(Error::SingularHessian)
        );
    }

    #[test]
    fn objective_never_decreases() {
        let mut rng = seeded_rng(3);
        for family in GlmFamily::ALL {
            for _ in 0..5 {
                let x = normal_matrix(&mut rng, 60, 3, 0.8);
                let b = normal_matrix(&mut rng, 3, 1, 1.0);
                let y = sample_responses(family, x.view(), b.view(), &Permutation::identity(60), rng.random()).unwrap();
                let fit = fit_column(family, x.view(), y.column(0), Array1::ones(60).view(), &NewtonSettings::default()).unwrap();
                for pair in fit.objective_trace.windows(2) {
                    assert!(pair[1] >= pair[0]);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seeded_rng(4);
        let h = 1e-6;
        for family in GlmFamily::ALL {
            let x = normal_matrix(&mut rng, 40, 3, 0.7);
            let b0 = normal_matrix(&mut rng, 3, 1, 1.0);
            let y = sample_responses(family, x.view(), b0.view(), &Permutation::identity(40), 5).unwrap();
            let w = Array1::from_shape_fn(40, |i| if i % 5 == 0 { 0.0 } else { 1.0 });
            for _ in 0..20 {
                let b = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
                let g = column_gradient(family, x.view(), y.column(0), w.view(), b.view());
                for k in 0..3 {
                    let mut up = b.clone();
                    let mut down = b.clone();
                    up[k] += h;
                    down[k] -= h;
                    let fd = (column_objective(family, x.view(), y.column(0), w.view(), up.view())
                        - column_objective(family, x.view(), y.column(0), w.view(), down.view()))
                        / (2.0 * h);
                    assert!((fd - g[k]).abs() <= 1e-5 * g[k].abs().max(1.0), "{family}: {fd} vs {}", g[k]);
                }
            }
        }
    }

    #[test]
    fn zero_weight_rows_have_no_influence() {
        let mut rng = seeded_rng(6);
        for family in [GlmFamily::Poisson, GlmFamily::Bernoulli, GlmFamily::Gaussian] {
            let x = normal_matrix(&mut rng, 50, 3, 0.7);
            let b = normal_matrix(&mut rng, 3, 1, 1.0);
            let y = sample_responses(family, x.view(), b.view(), &Permutation::identity(50), 8).unwrap();
            let keep: Vec<usize> = (0..50).filter(|i| i % 3 != 1).collect();
            let w = Array1::from_shape_fn(50, |i| if i % 3 == 1 { 0.0 } else { 1.0 });
            let mut y_garbage = y.column(0).to_owned();
            for i in 0..50 {
                if w[i] == 0.0 {
                    y_garbage[i] = f64::NAN;
                }
            }
            let masked = fit_column(family, x.view(), y_garbage.view(), w.view(), &NewtonSettings::default()).unwrap();
            let xs = x.select(Axis(0), &keep);
            let ys = y.column(0).select(Axis(0), &keep);
            let deleted = fit_column(family, xs.view(), ys.view(), Array1::ones(keep.len()).view(), &NewtonSettings::default()).unwrap();
            for (a, b) in masked.b.iter().zip(deleted.b.iter()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn fit_matrix_reduces_to_column_fits() {
        let mut rng = seeded_rng(7);
        let x = normal_matrix(&mut rng, 40, 3, 0.7);
        let b = normal_matrix(&mut rng, 3, 4, 1.0);
        let y = sample_responses(GlmFamily::Gaussian, x.view(), b.view(), &Permutation::identity(40), 2).unwrap();
        let data = Dataset::new(x.clone(), y.clone(), None).unwrap();
        let fit = fit_matrix(GlmFamily::Gaussian, &data, &Permutation::identity(40), &NewtonSettings::default()).unwrap();
        for l in 0..4 {
            let expect = ols(&x, y.column(l));
            for k in 0..3 {
                assert!((fit.b[[k, l]] - expect[k]).abs() <= 1e-8 * expect[k].abs().max(1.0));
            }
        }
        // m = 1 is exactly fit_column.
        let single = Dataset::new(x.clone(), y.slice(ndarray::s![.., 0..1]).to_owned(), None).unwrap();
        let one = fit_matrix(GlmFamily::Gaussian, &single, &Permutation::identity(40), &NewtonSettings::default()).unwrap();
        let direct = fit_column(GlmFamily::Gaussian, x.view(), y.column(0), Array1::ones(40).view(), &NewtonSettings::default()).unwrap();
        assert_eq!(one.b.column(0), direct.b);

        // A permutation is the same as permuting X by hand.
        let sigma = random_with_displacement(40, 10, 3).unwrap();
        let permuted = fit_matrix(GlmFamily::Poisson, &Dataset::new(x.clone(), y.mapv(|v| v.abs().round()), None).unwrap(), &sigma, &NewtonSettings::default()).unwrap();
        let manual = fit_matrix(
            GlmFamily::Poisson,
            &Dataset::new(sigma.apply_rows(x.view()), y.mapv(|v| v.abs().round()), None).unwrap(),
            &Permutation::identity(40),
            &NewtonSettings::default(),
        )
        .unwrap();
        assert_eq!(permuted.b, manual.b);
    }

    #[test]
    fn empty_column_is_dropped() {
        let x = Array2::from_shape_fn((6, 1), |(i, _)| 1.0 + i as f64 * 0.1);
        let y = Array2::from_shape_fn((6, 2), |(i, _)| i as f64);
        let mut mask = Array2::ones((6, 2));
        mask.column_mut(1).fill(0.0);
        let data = Dataset::new(x, y, Some(mask)).unwrap();
        let fit = fit_matrix(GlmFamily::Poisson, &data, &Permutation::identity(6), &NewtonSettings::default()).unwrap();
        assert!(fit.columns[1].empty);
        assert_eq!(fit.b[[0, 1]], 0.0);
        assert!(fit.columns[0].converged && !fit.columns[0].empty);
    }

    #[test]
    fn population_fit_recovers_truth() {
        let mut rng = seeded_rng(8);
        for family in GlmFamily::ALL {
            let x = normal_matrix(&mut rng, 30, 3, 0.6);
            let b = normal_matrix(&mut rng, 3, 2, 0.8);
            let truth = random_with_displacement(30, 8, 1).unwrap();
            let got = population_fit(family, x.view(), &truth, &truth, b.view(), &NewtonSettings::default()).unwrap();
            for (a, e) in got.iter().zip(b.iter()) {
                assert!((a - e).abs() < 1e-5, "{family} {a} {e}");
            }
        }
    }

    #[test]
    fn population_fit_gaussian_closed_form() {
        let mut rng = seeded_rng(9);
        let x = normal_matrix(&mut rng, 25, 3, 1.0);
        let b = normal_matrix(&mut rng, 3, 2, 1.0);
        let truth = random_with_displacement(25, 6, 2).unwrap();
        let perm = random_with_displacement(25, 10, 3).unwrap();
        let got = population_fit(GlmFamily::Gaussian, x.view(), &perm, &truth, b.view(), &NewtonSettings::default()).unwrap();
        // (XᵀX)⁻¹ Xᵀ Πᵀ Π♯ X B♯, with Πᵀ = Π⁻¹.
        let target = perm.inverse().apply_rows(truth.apply_rows(x.dot(&b).view()).view());
        for l in 0..2 {
            let expect = ols(&x, target.column(l));
            for k in 0..3 {
                assert!((got[[k, l]] - expect[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn population_fit_is_optimal_and_truth_dominates() {
        let mut rng = seeded_rng(10);
        let family = GlmFamily::Poisson;
        let x = normal_matrix(&mut rng, 5, 2, 0.8);
        let b = normal_matrix(&mut rng, 2, 3, 0.8);
        let truth = Permutation::new(vec![1, 0, 2, 4, 3]).unwrap();
        let settings = NewtonSettings::default();
        let best = population_likelihood(family, x.view(), &truth, b.view(), &truth, b.view(), 1.0).unwrap();
        for perm in all_permutations(5) {
            let fitted = population_fit(family, x.view(), &perm, &truth, b.view(), &settings).unwrap();
            let at_fit = population_likelihood(family, x.view(), &perm, fitted.view(), &truth, b.view(), 1.0).unwrap();
            assert!(best - at_fit >= -1e-10);
        }
        let perm = Permutation::new(vec![4, 3, 2, 1, 0]).unwrap();
        let fitted = population_fit(family, x.view(), &perm, &truth, b.view(), &settings).unwrap();
        let at_fit = population_likelihood(family, x.view(), &perm, fitted.view(), &truth, b.view(), 1.0).unwrap();
        for _ in 0..50 {
            let other = normal_matrix(&mut rng, 2, 3, 1.0);
            let v = population_likelihood(family, x.view(), &perm, other.view(), &truth, b.view(), 1.0).unwrap();
            assert!(at_fit >= v - 1e-12);
        }
    }
}
