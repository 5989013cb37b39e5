//! Closed-form theory quantities: pairwise information gaps and variances,
//! the perfect-recovery bound, KL divergences between permuted models, the
//! Fano lower bound and the projection gap.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::{check_coefficients, GlmFamily};
use crate::likelihood::{population_likelihood, KahanSum};
use crate::linalg::{gram, Cholesky};
use crate::permutation::Permutation;

/// Tolerance for the pseudo-inverse fallback in [`projection_gap`].
const PINV_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseDiagnostics {
    /// `Δ_ij`: expected log-likelihood lost by giving row `i` the mean of row `j`.
    pub delta: Array2<f64>,
    /// `v_ij`, the matching variance term.
    pub variance: Array2<f64>,
    /// `n² max_{i≠j} exp(−Δ²_ij / (16 v_ij))`.
    pub theorem1_bound: f64,
}

struct Kernels {
    lambda: Array2<f64>,
    psi: Array2<f64>,
    d1: Array2<f64>,
    d2: Array2<f64>,
}

fn kernels(family: GlmFamily, x: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Kernels> {
    check_coefficients(x, b, b.ncols())?;
    let lambda = x.dot(&b);
    Ok(Kernels {
        psi: lambda.mapv(|v| family.psi(v)),
        d1: lambda.mapv(|v| family.psi_prime(v)),
        d2: lambda.mapv(|v| family.psi_double_prime(v)),
        lambda,
    })
}

/// One Bregman term `ψ′(a)(a − b) − ψ(a) + ψ(b)`. Nonnegative by convexity,
/// so rounding below zero is clamped.
#[inline]
fn bregman(psi_a: f64, d1_a: f64, a: f64, psi_b: f64, b: f64) -> f64 {
    (d1_a * (a - b) - psi_a + psi_b).max(0.0)
}

fn failure_term(delta: f64, variance: f64) -> f64 {
    if variance > 0.0 {
        (-delta * delta / (16.0 * variance)).exp()
    } else if delta > 0.0 {
        0.0
    } else {
        1.0
    }
}

fn recovery_bound(delta: &Array2<f64>, variance: &Array2<f64>) -> f64 {
    let n = delta.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(failure_term(delta[[i, j]], variance[[i, j]]));
            }
        }
    }
    (n * n) as f64 * worst
}

fn check_rate(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "observation rate (0, 1]",
            value: q,
        })
    }
}

/// Pairwise gaps and variances at observation rate `q`. Returns
/// `(q Δ, q v + q(1−q) s)` where `s_ij` sums the squared Bregman terms.
fn pairwise_at(k: &Kernels, q: f64) -> (Array2<f64>, Array2<f64>) {
    let n = k.lambda.nrows();
    let m = k.lambda.ncols();
    let mut delta = Array2::zeros((n, n));
    let mut variance = Array2::zeros((n, n));
    delta
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(variance.axis_iter_mut(Axis(0)))
        .enumerate()
        .for_each(|(i, (mut drow, mut vrow))| {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (mut d, mut v, mut s) = (KahanSum::default(), KahanSum::default(), KahanSum::default());
                for l in 0..m {
                    let a = k.lambda[[i, l]];
                    let b = k.lambda[[j, l]];
                    let term = bregman(k.psi[[i, l]], k.d1[[i, l]], a, k.psi[[j, l]], b);
                    d.add(term);
                    v.add(k.d2[[i, l]] * (a - b) * (a - b));
                    s.add(term * term);
                }
                drow[j] = q * d.value();
                vrow[j] = q * v.value() + q * (1.0 - q) * s.value();
            }
        });
    (delta, variance)
}

/// `Δ_ij`, `v_ij` and the perfect-recovery bound for fully observed data.
pub fn pairwise(family: GlmFamily, x: ArrayView2<'_, f64>, b_true: ArrayView2<'_, f64>) -> Result<PairwiseDiagnostics> {
    pairwise_missing(family, x, b_true, 1.0)
}

/// The same quantities when each cell is observed independently with
/// probability `q`.
pub fn pairwise_missing(family: GlmFamily, x: ArrayView2<'_, f64>, b_true: ArrayView2<'_, f64>, q: f64) -> Result<PairwiseDiagnostics> {
    check_rate(q)?;
    let k = kernels(family, x, b_true)?;
    let (delta, variance) = pairwise_at(&k, q);
    let theorem1_bound = recovery_bound(&delta, &variance);
    Ok(PairwiseDiagnostics {
        delta,
        variance,
        theorem1_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PermutationVariances {
    /// Variance proxy of `L(Π, B)`.
    pub v_perm_b: f64,
    /// Variance mass of the rows that `Π` mislabels, at the true parameters.
    pub v_partial: f64,
    /// Smallest pairwise variance over `i ≠ j`; infinite when `n = 1`.
    pub v_min: f64,
}

fn check_perm(p: &Permutation, n: usize) -> Result<()> {
    if p.len() == n {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: n,
            actual: p.len(),
        })
    }
}

/// `v_{Π,B}`, `v_{Π,partial}` and `v_min` at observation rate `q`; `q = 1`
/// drops every `q(1−q)` correction.
#[allow(clippy::too_many_arguments)]
pub fn permutation_variances(
    family: GlmFamily,
    x: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    perm: &Permutation,
    truth_perm: &Permutation,
    truth_b: ArrayView2<'_, f64>,
    q: f64,
) -> Result<PermutationVariances> {
    check_rate(q)?;
    let n = x.nrows();
    check_perm(perm, n)?;
    check_perm(truth_perm, n)?;
    check_coefficients(x, b, b.ncols())?;
    if truth_b.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            context: "true coefficients",
            expected: b.dim(),
            actual: truth_b.dim(),
        });
    }
    let truth = kernels(family, x, truth_b)?;
    let lambda = x.dot(&b);
    let m = b.ncols();

    let mut v_main = KahanSum::default();
    let mut v_corr = KahanSum::default();
    let mut partial_main = KahanSum::default();
    let mut partial_corr = KahanSum::default();
    for i in 0..n {
        let t = truth_perm.get(i);
        let r = perm.get(i);
        for l in 0..m {
            let eta = lambda[[r, l]];
            v_main.add(truth.d2[[t, l]] * eta * eta);
            let c = truth.d1[[t, l]] * eta - family.psi(eta);
            v_corr.add(c * c);
        }
        if r != t {
            for l in 0..m {
                let a = truth.lambda[[t, l]];
                let bb = truth.lambda[[r, l]];
                partial_main.add(truth.d2[[t, l]] * (a - bb) * (a - bb));
                let s = bregman(truth.psi[[t, l]], truth.d1[[t, l]], a, truth.psi[[r, l]], bb);
                partial_corr.add(s * s);
            }
        }
    }
    let corr = q * (1.0 - q);
    let (_, variance) = pairwise_at(&truth, q);
    let mut v_min = f64::INFINITY;
    for ((i, j), &v) in variance.indexed_iter() {
        if i != j {
            v_min = v_min.min(v);
        }
    }
    Ok(PermutationVariances {
        v_perm_b: q * v_main.value() + corr * v_corr.value(),
        v_partial: q * partial_main.value() + corr * partial_corr.value(),
        v_min,
    })
}

/// `KL(f_a ‖ f_b)` where `f_k` is the response law with true labels `perm_k`:
/// `Λ_a(perm_a) − Λ_a(perm_b)`.
pub fn kl_between_permutations(
    family: GlmFamily,
    x: ArrayView2<'_, f64>,
    b_true: ArrayView2<'_, f64>,
    perm_a: &Permutation,
    perm_b: &Permutation,
) -> Result<f64> {
    let own = population_likelihood(family, x, perm_a, b_true, perm_a, b_true, 1.0)?;
    let other = population_likelihood(family, x, perm_b, b_true, perm_a, b_true, 1.0)?;
    // Nonnegative by Gibbs' inequality; anything below is rounding.
    Ok((own - other).max(0.0))
}

/// Fano's bound on the minimax error of identifying one of `r` models whose
/// pairwise KL divergences are at most `beta`.
pub fn fano_lower_bound(beta: f64, r: u64) -> Result<f64> {
    if r < 2 {
        return Err(Error::Domain {
            what: "number of models (>= 2)",
            value: r as f64,
        });
    }
    fano_lower_bound_ln(beta, (r as f64).ln())
}

/// [`fano_lower_bound`] with `ln r` given directly, for model counts like
/// `n!` that overflow integers.
pub fn fano_lower_bound_ln(beta: f64, ln_r: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain {
            what: "KL bound (>= 0)",
            value: beta,
        });
    }
    if !(ln_r >= std::f64::consts::LN_2 * (1.0 - 1e-15)) {
        return Err(Error::Domain {
            what: "log model count (>= ln 2)",
            value: ln_r,
        });
    }
    Ok((1.0 - (beta + std::f64::consts::LN_2) / ln_r).max(0.0))
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    let mut acc = KahanSum::default();
    for k in 2..=n {
        acc.add((k as f64).ln());
    }
    acc.value()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionGap {
    /// One residual norm per response column.
    pub gaps: Vec<f64>,
    /// The permuted displaced block had singular Gram matrix; the gaps were
    /// computed with a pseudo-inverse.
    pub rank_deficient: bool,
}

/// For each column `b_l`, the distance from `X₁ b_l` to the column space of
/// `X_{Π,1}`, where `X₁` holds the rows `Π` displaces and `X_{Π,1}` the same
/// rows of `ΠX`.
pub fn projection_gap(x: ArrayView2<'_, f64>, b_true: ArrayView2<'_, f64>, perm: &Permutation, h: usize) -> Result<ProjectionGap> {
    let n = x.nrows();
    check_perm(perm, n)?;
    check_coefficients(x, b_true, b_true.ncols())?;
    let displaced: Vec<usize> = (0..n).filter(|&i| perm.get(i) != i).collect();
    if displaced.len() != h {
        return Err(Error::InvalidDisplacement { n, h });
    }
    let m = b_true.ncols();
    if displaced.is_empty() {
        return Ok(ProjectionGap {
            gaps: vec![0.0; m],
            rank_deficient: false,
        });
    }
    let x1 = x.select(Axis(0), &displaced);
    let moved: Vec<usize> = displaced.iter().map(|&i| perm.get(i)).collect();
    let xp1 = x.select(Axis(0), &moved);
    let targets = x1.dot(&b_true);

    let fitted = match Cholesky::new(gram(xp1.view()).view()) {
        Some(chol) => Some(xp1.dot(&chol.solve_matrix(xp1.t().dot(&targets).view()))),
        None => None,
    };
    let (fitted, rank_deficient) = match fitted {
        Some(f) => (f, false),
        None => {
            let a = DMatrix::from_fn(xp1.nrows(), xp1.ncols(), |i, j| xp1[[i, j]]);
            let svd = a.clone().svd(true, true);
            let mut f = Array2::zeros(targets.raw_dim());
            for l in 0..m {
                let t = DVector::from_iterator(targets.nrows(), targets.column(l).iter().copied());
                let coef = svd
                    .solve(&t, PINV_EPS * svd.singular_values.max().max(f64::MIN_POSITIVE))
                    .map_err(|e| Error::InvalidShape(e.to_string()))?;
                let fit = &a * coef;
                for i in 0..targets.nrows() {
                    f[[i, l]] = fit[i];
                }
            }
            (f, true)
        }
    };
    let resid = &targets - &fitted;
    let gaps = resid.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    Ok(ProjectionGap { gaps, rank_deficient })
}
