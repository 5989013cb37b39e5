//! Empirical and population log-likelihoods and the assignment cost matrix.
//!
//! All sums run row-major (`i` outer, `l` inner) with compensated
//! accumulation. A cell with weight 1 contributes exactly the same bits as the
//! unmasked path; a cell with weight 0 is skipped outright, so placeholder
//! values under the mask never reach the arithmetic.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::assignment::CostMatrix;
use crate::error::{Error, Result};
use crate::glm::{check_coefficients, Dataset, GlmFamily};
use crate::permutation::Permutation;

/// Compensated (Kahan–Babuška/Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// A family paired with the data it is evaluated on.
#[derive(Debug, Clone, Copy)]
pub struct LikelihoodContext<'a> {
    pub family: GlmFamily,
    pub data: &'a Dataset,
}

impl<'a> LikelihoodContext<'a> {
    pub fn new(family: GlmFamily, data: &'a Dataset) -> Self {
        LikelihoodContext { family, data }
    }
}

/// `Σ_{i,l} w_il · (Y[i,l]·λ − ψ(λ))` with `λ = x_{perm(i)}ᵀ b_l`.
pub fn log_likelihood(ctx: &LikelihoodContext<'_>, perm: &Permutation, b: ArrayView2<'_, f64>) -> Result<f64> {
    let data = ctx.data;
    check_coefficients(data.x(), b, data.m())?;
    if perm.len() != data.n() {
        return Err(Error::LengthMismatch {
            expected: data.n(),
            actual: perm.len(),
        });
    }
    let lambda = data.x().dot(&b);
    let y = data.y();
    let family = ctx.family;
    let mut acc = KahanSum::default();
    for i in 0..data.n() {
        let row = lambda.row(perm.get(i));
        for l in 0..data.m() {
            let w = data.weight(i, l);
            if w == 0.0 {
                continue;
            }
            let eta = row[l];
            acc.add(w * (y[[i, l]] * eta - family.psi(eta)));
        }
    }
    Ok(acc.value())
}

/// `C[i, j] = Σ_l w_jl · (ψ(x_iᵀ b_l) − Y[j, l]·x_iᵀ b_l)`.
///
/// Design row `i` against response row `j`; the weight follows the response
/// row. `L(Π, B) = −Σ_j C[Π(j), j]`, so minimizing assignment on `C` maximizes
/// the likelihood over permutations.
pub fn cost_matrix(ctx: &LikelihoodContext<'_>, b: ArrayView2<'_, f64>) -> Result<CostMatrix> {
    let data = ctx.data;
    check_coefficients(data.x(), b, data.m())?;
    let n = data.n();
    let m = data.m();
    let family = ctx.family;
    let lambda = data.x().dot(&b);
    let psi = lambda.mapv(|v| family.psi(v));
    let y = data.y();
    let mut c = Array2::<f64>::zeros((n, n));
    c.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut out)| {
            let lam = lambda.row(i);
            let ps = psi.row(i);
            for j in 0..n {
                let mut acc = KahanSum::default();
                for l in 0..m {
                    let w = data.weight(j, l);
                    if w == 0.0 {
                        continue;
                    }
                    acc.add(w * (ps[l] - y[[j, l]] * lam[l]));
                }
                out[j] = acc.value();
            }
        });
    CostMatrix::new(c)
}

/// `q · Σ_{i,l} {−ψ(λ_il) + ψ′(λ♯_il)·λ_il}` with `λ` from `(perm, b)` and `λ♯`
/// from `(truth_perm, truth_b)`: the expected log-likelihood when each cell is
/// observed with probability `q`.
#[allow(clippy::too_many_arguments)]
pub fn population_likelihood(
    family: GlmFamily,
    x: ArrayView2<'_, f64>,
    perm: &Permutation,
    b: ArrayView2<'_, f64>,
    truth_perm: &Permutation,
    truth_b: ArrayView2<'_, f64>,
    q: f64,
) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain {
            what: "observation rate (0, 1]",
            value: q,
        });
    }
    if b.nrows() != x.ncols() || truth_b.dim() != b.dim() {
        return Err(Error::ShapeMismatch {
            context: "coefficients",
            expected: (x.ncols(), truth_b.ncols()),
            actual: b.dim(),
        });
    }
    for p in [perm, truth_perm] {
        if p.len() != x.nrows() {
            return Err(Error::LengthMismatch {
                expected: x.nrows(),
                actual: p.len(),
            });
        }
    }
    let lambda = x.dot(&b);
    let truth = x.dot(&truth_b);
    let mut acc = KahanSum::default();
    for i in 0..x.nrows() {
        let row = lambda.row(perm.get(i));
        let truth_row = truth.row(truth_perm.get(i));
        for l in 0..b.ncols() {
            let eta = row[l];
            acc.add(-family.psi(eta) + family.psi_prime(truth_row[l]) * eta);
        }
    }
    Ok(q * acc.value())
}
