//! Nuclear-norm regularized matrix completion by iterated soft-thresholded
//! SVD: `M ← S_λ(P_Ω(Y) + P_Ω⊥(M))`.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeSettings {
    /// Singular-value shrinkage. `None` uses a tenth of the largest singular
    /// value of the zero-filled observations.
    pub lambda: Option<f64>,
    /// Rank cap. `None` uses `min(n, m, 20)`.
    pub max_rank: Option<usize>,
    pub max_iterations: usize,
    /// Stop once `‖M_new − M‖_F / ‖M‖_F` falls below this.
    pub rel_tolerance: f64,
}

impl Default for ImputeSettings {
    fn default() -> Self {
        ImputeSettings {
            lambda: None,
            max_rank: None,
            max_iterations: 300,
            rel_tolerance: 1e-6,
        }
    }
}

impl ImputeSettings {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::InvalidSetting("soft-impute lambda must be >= 0".into()));
            }
        }
        if self.max_rank == Some(0) {
            return Err(Error::InvalidSetting("soft-impute max_rank must be >= 1".into()));
        }
        if !(self.rel_tolerance > 0.0) {
            return Err(Error::InvalidSetting("soft-impute rel_tolerance must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imputation {
    pub completed: Array2<f64>,
    pub lambda: f64,
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    /// `½‖P_Ω(Y − M)‖²_F + λ‖M‖_*` at the starting point and after each
    /// iteration.
    pub objective_trace: Vec<f64>,
}

struct ShrunkSvd {
    matrix: DMatrix<f64>,
    nuclear_norm: f64,
    rank: usize,
}

fn to_dmatrix(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn to_array(a: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Singular values of `z` sorted descending.
fn singular_values(z: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = z.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `U · diag(max(σ − λ, 0)) · Vᵀ`, keeping at most `max_rank` components.
fn shrink(z: DMatrix<f64>, lambda: f64, max_rank: usize) -> ShrunkSvd {
    let (r, c) = z.shape();
    let svd = z.svd(true, true);
    let u = svd.u.expect("U requested");
    let v_t = svd.v_t.expect("Vᵀ requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(r, c);
    let mut nuclear = 0.0;
    let mut rank = 0;
    for &k in order.iter().take(max_rank) {
        let s = svd.singular_values[k] - lambda;
        if s <= 0.0 {
            break;
        }
        out += (u.column(k) * s) * v_t.row(k);
        nuclear += s;
        rank += 1;
    }
    ShrunkSvd {
        matrix: out,
        nuclear_norm: nuclear,
        rank,
    }
}

fn objective(y: &DMatrix<f64>, mask: ArrayView2<'_, f64>, m: &DMatrix<f64>, lambda: f64, nuclear: f64) -> f64 {
    let mut fit = 0.0;
    for ((i, j), &w) in mask.indexed_iter() {
        if w != 0.0 {
            let r = y[(i, j)] - m[(i, j)];
            fit += r * r;
        }
    }
    0.5 * fit + lambda * nuclear
}

/// Completes `y_obs` on the unobserved cells of `mask`, starting from zero.
pub fn soft_impute(y_obs: ArrayView2<'_, f64>, mask: ArrayView2<'_, f64>, settings: &ImputeSettings) -> Result<Imputation> {
    soft_impute_from(y_obs, mask, settings, None)
}

/// As [`soft_impute`], starting the iteration at `init`.
pub fn soft_impute_from(
    y_obs: ArrayView2<'_, f64>,
    mask: ArrayView2<'_, f64>,
    settings: &ImputeSettings,
    init: Option<ArrayView2<'_, f64>>,
) -> Result<Imputation> {
    settings.validate()?;
    if mask.dim() != y_obs.dim() {
        return Err(Error::ShapeMismatch {
            context: "soft-impute mask",
            expected: y_obs.dim(),
            actual: mask.dim(),
        });
    }
    if let Some(init) = init {
        if init.dim() != y_obs.dim() {
            return Err(Error::ShapeMismatch {
                context: "soft-impute start",
                expected: y_obs.dim(),
                actual: init.dim(),
            });
        }
    }
    let (n, m) = y_obs.dim();
    if !mask.iter().any(|&w| w != 0.0) {
        return Err(Error::EmptyMask);
    }
    for ((row, col), &v) in y_obs.indexed_iter() {
        if mask[[row, col]] != 0.0 && !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }

    // Zero-filled observations; unobserved cells never read from y_obs again.
    let observed = DMatrix::from_fn(n, m, |i, j| if mask[[i, j]] != 0.0 { y_obs[[i, j]] } else { 0.0 });
    let lambda = match settings.lambda {
        Some(l) => l,
        None => 0.1 * singular_values(&observed).first().copied().unwrap_or(0.0),
    };
    let max_rank = settings.max_rank.unwrap_or(20).min(n).min(m);

    let mut current = match init {
        Some(init) => to_dmatrix(init),
        None => DMatrix::zeros(n, m),
    };
    let start_nuclear = if init.is_some() {
        singular_values(&current).iter().sum()
    } else {
        0.0
    };
    let mut trace = vec![objective(&observed, mask, &current, lambda, start_nuclear)];
    let mut iterations = 0;
    let mut converged = false;
    let mut rank = 0;

    while iterations < settings.max_iterations {
        let mut filled = current.clone();
        for ((i, j), &w) in mask.indexed_iter() {
            if w != 0.0 {
                filled[(i, j)] = observed[(i, j)];
            }
        }
        let next = shrink(filled, lambda, max_rank);
        iterations += 1;
        rank = next.rank;
        trace.push(objective(&observed, mask, &next.matrix, lambda, next.nuclear_norm));
        let change = (&next.matrix - &current).norm();
        let scale = current.norm();
        current = next.matrix;
        if change <= settings.rel_tolerance * scale || (change == 0.0 && scale == 0.0) {
            converged = true;
            break;
        }
    }

    Ok(Imputation {
        completed: to_array(&current),
        lambda,
        rank,
        iterations,
        converged,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::seeded_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn full_rank(n: usize, m: usize) -> ImputeSettings {
        ImputeSettings {
            max_rank: Some(n.min(m)),
            ..Default::default()
        }
    }

    #[test]
    fn full_mask_without_shrinkage_returns_input() {
        let mut rng = seeded_rng(1);
        let y = Array2::from_shape_fn((12, 7), |_| rng.sample::<f64, _>(StandardNormal));
        let mask = Array2::ones((12, 7));
        let out = soft_impute(y.view(), mask.view(), &ImputeSettings { lambda: Some(0.0), ..full_rank(12, 7) }).unwrap();
        assert!(out.converged);
        for (a, b) in out.completed.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn full_mask_equals_soft_thresholded_svd() {
        let mut rng = seeded_rng(2);
        let y = Array2::from_shape_fn((10, 6), |_| rng.sample::<f64, _>(StandardNormal));
        let lambda = 1.3;
        let out = soft_impute(y.view(), Array2::ones((10, 6)).view(), &ImputeSettings { lambda: Some(lambda), ..full_rank(10, 6) }).unwrap();
        // Closed form: shrink every singular value of Y by λ.
        let svd = to_dmatrix(y.view()).svd(true, true);
        let mut s = svd.singular_values.clone();
        s.apply(|v| *v = (*v - lambda).max(0.0));
        let expect = svd.u.unwrap() * DMatrix::from_diagonal(&s) * svd.v_t.unwrap();
        for i in 0..10 {
            for j in 0..6 {
                assert!((out.completed[[i, j]] - expect[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn completes_rank_one_matrix() {
        let mut rng = seeded_rng(3);
        let n = 60;
        let u = Array2::from_shape_fn((n, 1), |_| rng.random_range(0.5..1.5));
        let v = Array2::from_shape_fn((1, n), |_| rng.random_range(0.5..1.5));
        let truth = u.dot(&v);
        let mask = Array2::from_shape_fn((n, n), |_| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        let settings = ImputeSettings {
            lambda: Some(0.05),
            max_rank: Some(n),
            max_iterations: 2000,
            rel_tolerance: 1e-9,
        };
        let out = soft_impute(truth.view(), mask.view(), &settings).unwrap();
        let err = (&out.completed - &truth).mapv(|x| x * x).sum().sqrt() / truth.mapv(|x| x * x).sum().sqrt();
        assert!(err <= 0.05, "relative error {err}");
    }

    #[test]
    fn objective_is_monotone_and_fixed_point_is_stable() {
        let mut rng = seeded_rng(4);
        let (n, m) = (30, 20);
        let a = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let b = Array2::from_shape_fn((3, m), |_| rng.sample::<f64, _>(StandardNormal));
        let noisy = a.dot(&b) + Array2::from_shape_fn((n, m), |_| 0.1 * rng.sample::<f64, _>(StandardNormal));
        let mask = Array2::from_shape_fn((n, m), |_| if rng.random_bool(0.7) { 1.0 } else { 0.0 });
        let settings = ImputeSettings { lambda: Some(0.5), ..full_rank(n, m) };
        let out = soft_impute(noisy.view(), mask.view(), &settings).unwrap();
        for pair in out.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9 * pair[0].abs());
        }
        assert!(out.converged);
        let again = soft_impute_from(noisy.view(), mask.view(), &settings, Some(out.completed.view())).unwrap();
        let change = (&again.completed - &out.completed).mapv(|x| x * x).sum().sqrt();
        let scale = out.completed.mapv(|x| x * x).sum().sqrt();
        assert!(change / scale < 1e-5);
    }

    #[test]
    fn observed_entries_approach_data_as_lambda_vanishes() {
        let mut rng = seeded_rng(5);
        let y = Array2::from_shape_fn((15, 10), |_| rng.sample::<f64, _>(StandardNormal));
        let mask = Array2::from_shape_fn((15, 10), |_| if rng.random_bool(0.6) { 1.0 } else { 0.0 });
        let mut last = f64::INFINITY;
        for lambda in [1.0, 0.3, 0.05] {
            let out = soft_impute(
                y.view(),
                mask.view(),
                &ImputeSettings { lambda: Some(lambda), max_iterations: 3000, ..full_rank(15, 10) },
            )
            .unwrap();
            let resid: f64 = mask
                .indexed_iter()
                .filter(|(_, &w)| w != 0.0)
                .map(|((i, j), _)| (out.completed[[i, j]] - y[[i, j]]).powi(2))
                .sum();
            assert!(resid < last);
            last = resid;
        }
    }

    #[test]
    fn empty_mask_is_an_error() {
        let y = Array2::ones((3, 3));
        assert_eq!(
            soft_impute(y.view(), Array2::zeros((3, 3)).view(), &ImputeSettings::default()),
            Err(Error::EmptyMask)
        );
    }
}
