//! Linear-model baselines: the biconvex ADMM over permutations,
//! `min −tr(Π₁ P_X Π₂ᵀ YYᵀ)` subject to `Π₁ = Π₂`, and the averaging and
//! eigenvalue sort-matching initializers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_min, CostMatrix};
use crate::error::{Error, Result};
use crate::linalg::{gram, Cholesky};
use crate::permutation::Permutation;
use crate::random::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmSettings {
    pub rho: f64,
    pub max_iterations: usize,
    /// Starting `Π₁ = Π₂`; identity when absent.
    pub init: Option<Permutation>,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        AdmmSettings {
            rho: 1.0,
            max_iterations: 200,
            init: None,
        }
    }
}

impl AdmmSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidSetting("ADMM rho must be > 0".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidSetting("ADMM max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmmOutcome {
    pub perm: Permutation,
    pub iterations: usize,
    pub converged: bool,
}

/// The data the Π-updates need: `YYᵀ Π P_X` for any `Π` is computed as
/// `Y (Yᵀ ΠX) (XᵀX)⁻¹ Xᵀ`, never forming an `n × n` product of two `n × n`
/// matrices.
pub struct AdmmProblem {
    x: Array2<f64>,
    y: Array2<f64>,
    gram_inv: Array2<f64>,
}

impl AdmmProblem {
    pub fn new(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::ShapeMismatch {
                context: "responses",
                expected: (x.nrows(), y.ncols()),
                actual: y.dim(),
            });
        }
        if x.nrows() == 0 {
            return Err(Error::InvalidShape("empty design".into()));
        }
        let chol = Cholesky::new(gram(x).view()).ok_or(Error::RankDeficient("XᵀX is singular"))?;
        Ok(AdmmProblem {
            x: x.to_owned(),
            y: y.to_owned(),
            gram_inv: chol.inverse(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// `YYᵀ Π P_X`.
    pub fn coupling(&self, perm: &Permutation) -> Array2<f64> {
        let px = perm.apply_rows(self.x.view());
        let k = self.y.dot(&self.y.t().dot(&px));
        k.dot(&self.gram_inv).dot(&self.x.t())
    }

    /// `tr(Π₁ P_X Π₂ᵀ YYᵀ)`, the quantity both blocks maximize.
    pub fn objective(&self, pi1: &Permutation, pi2: &Permutation) -> f64 {
        let c = self.coupling(pi2);
        (0..self.n()).map(|i| c[[i, pi1.get(i)]]).sum()
    }

    /// `argmin_Π ⟨Π, −YYᵀΠ₂P_X + μ − ρΠ₂⟩`.
    pub fn pi1_update(&self, pi2: &Permutation, mu: ArrayView2<'_, f64>, rho: f64) -> Result<Permutation> {
        let mut a = self.coupling(pi2).mapv(|v| -v) + mu;
        subtract_scaled_perm(&mut a, pi2, rho);
        argmin_linear(a)
    }

    /// `argmin_Π ⟨Π, −YYᵀΠ₁P_X − μ − ρΠ₁⟩`.
    pub fn pi2_update(&self, pi1: &Permutation, mu: ArrayView2<'_, f64>, rho: f64) -> Result<Permutation> {
        let mut a = self.coupling(pi1).mapv(|v| -v) - mu;
        subtract_scaled_perm(&mut a, pi1, rho);
        argmin_linear(a)
    }
}

fn subtract_scaled_perm(a: &mut Array2<f64>, perm: &Permutation, rho: f64) {
    for i in 0..perm.len() {
        a[[i, perm.get(i)]] -= rho;
    }
}

/// `argmin_Π ⟨Π, A⟩ = argmin Σ_i A[i, π(i)]`.
fn argmin_linear(a: Array2<f64>) -> Result<Permutation> {
    // solve_min minimizes Σ_i C[τ(i), i]; feed it the transpose.
    Ok(solve_min(&CostMatrix::new(a.reversed_axes())?).0)
}

/// Alternates the two Π-updates and the dual step `μ ← μ + ρ(Π₁ − Π₂)` until
/// `Π₁ = Π₂` or the iteration cap. Returns `Π₁`.
pub fn admm_recover(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, settings: &AdmmSettings) -> Result<AdmmOutcome> {
    settings.validate()?;
    let problem = AdmmProblem::new(x, y)?;
    let n = problem.n();
    let init = settings.init.clone().unwrap_or_else(|| Permutation::identity(n));
    if init.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: init.len(),
        });
    }
    let rho = settings.rho;
    let mut pi2 = init;
    let mut mu = Array2::<f64>::zeros((n, n));
    for it in 1..=settings.max_iterations {
        let pi1 = problem.pi1_update(&pi2, mu.view(), rho)?;
        pi2 = problem.pi2_update(&pi1, mu.view(), rho)?;
        for i in 0..n {
            mu[[i, pi1.get(i)]] += rho;
            mu[[i, pi2.get(i)]] -= rho;
        }
        if pi1 == pi2 {
            return Ok(AdmmOutcome {
                perm: pi1,
                iterations: it,
                converged: true,
            });
        }
        if it == settings.max_iterations {
            return Ok(AdmmOutcome {
                perm: pi1,
                iterations: it,
                converged: false,
            });
        }
    }
    unreachable!("max_iterations >= 1")
}

/// Maximizes `⟨u, Πx⟩²`. Matching `u` and `x` in the same sorted order
/// maximizes the inner product, opposite orders minimize it; the larger
/// square wins, ties going to the same-order match. Sorting ties break by the
/// other vector's value, then index, so a constant `x` yields the identity.
pub fn sort_match(u: ArrayView1<'_, f64>, x: ArrayView1<'_, f64>) -> Permutation {
    let n = u.len();
    assert_eq!(n, x.len(), "sort_match needs equal lengths");
    let mut rows: Vec<usize> = (0..n).collect();
    rows.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(x[a].total_cmp(&x[b])).then(a.cmp(&b)));
    let mut cols: Vec<usize> = (0..n).collect();
    cols.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(u[a].total_cmp(&u[b])).then(a.cmp(&b)));

    let build = |order: &dyn Fn(usize) -> usize| {
        let mut map = vec![0; n];
        for (k, &i) in rows.iter().enumerate() {
            map[i] = cols[order(k)];
        }
        Permutation::new(map).expect("sorted orders form a bijection")
    };
    let ascending = build(&|k| k);
    let descending = build(&|k| n - 1 - k);
    let score = |p: &Permutation| {
        let s: f64 = (0..n).map(|i| u[i] * x[p.get(i)]).sum();
        s * s
    };
    if score(&descending) > score(&ascending) {
        descending
    } else {
        ascending
    }
}

/// Row means of `Y` matched against `x`.
pub fn averaging_estimator(x_summary: ArrayView1<'_, f64>, y: ArrayView2<'_, f64>) -> Result<Permutation> {
    check_summary(x_summary, y)?;
    let ybar = y.mean_axis(Axis(1)).ok_or(Error::InvalidShape("responses need at least one column".into()))?;
    Ok(sort_match(ybar.view(), x_summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenEstimate {
    pub perm: Permutation,
    /// Power iteration met its tolerance.
    pub converged: bool,
}

const POWER_TOLERANCE: f64 = 1e-10;
const POWER_MAX_STEPS: usize = 1000;

/// Principal eigenvector of `m⁻¹ YYᵀ` by power iteration from a fixed random
/// start, matched against `x`.
pub fn eigenvalue_estimator(x_summary: ArrayView1<'_, f64>, y: ArrayView2<'_, f64>) -> Result<EigenEstimate> {
    check_summary(x_summary, y)?;
    if y.ncols() == 0 {
        return Err(Error::InvalidShape("responses need at least one column".into()));
    }
    let (u, converged) = principal_eigenvector(y);
    Ok(EigenEstimate {
        perm: sort_match(u.view(), x_summary),
        converged,
    })
}

fn principal_eigenvector(y: ArrayView2<'_, f64>) -> (Array1<f64>, bool) {
    let n = y.nrows();
    let m = y.ncols() as f64;
    let mut rng = seeded_rng(0x5eed);
    let mut u: Array1<f64> = Array1::from_shape_fn(n, |_| rng.sample(StandardNormal));
    u /= u.dot(&u).sqrt();
    for _ in 0..POWER_MAX_STEPS {
        let mut next = y.dot(&y.t().dot(&u)) / m;
        let norm = next.dot(&next).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return (u, false);
        }
        next /= norm;
        let sign = if next.dot(&u) < 0.0 { -1.0 } else { 1.0 };
        let change = (&next * sign - &u).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        u = next * sign;
        if change <= POWER_TOLERANCE {
            return (u, true);
        }
    }
    (u, false)
}

fn check_summary(x: ArrayView1<'_, f64>, y: ArrayView2<'_, f64>) -> Result<()> {
    if x.len() != y.nrows() {
        return Err(Error::LengthMismatch {
            expected: y.nrows(),
            actual: x.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearInit {
    Averaging,
    Eigen,
}

/// Collapses `X` to its row means and runs the chosen sort-matching estimator.
pub fn warm_start_linear(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, method: LinearInit) -> Result<Permutation> {
    let xbar = x.mean_axis(Axis(1)).ok_or(Error::InvalidShape("design needs at least one column".into()))?;
    match method {
        LinearInit::Averaging => averaging_estimator(xbar.view(), y),
        LinearInit::Eigen => Ok(eigenvalue_estimator(xbar.view(), y)?.perm),
    }
}
