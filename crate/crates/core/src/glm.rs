//! Exponential-family kernels and the matrix containers shared by the rest of
//! the crate.
//!
//! A response `y` with natural parameter `λ` has log-density
//! `y·λ − ψ(λ)` up to a term that depends on `y` alone; every estimator in
//! this crate only ever needs `ψ` and its first two derivatives.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Permutation;
use crate::random::seeded_rng;

/// Regression coefficients, `p × m`, one column per response dimension.
pub type Coefficients = Array2<f64>;

/// The canonical-link exponential families shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GlmFamily {
    /// `ψ(x) = x²/2`, unit-variance normal responses with mean `λ`.
    Gaussian,
    /// `ψ(x) = exp(x)`, Poisson counts with rate `exp(λ)`.
    Poisson,
    /// `ψ(x) = log(1 + exp(x))`, Bernoulli responses with success
    /// probability `sigmoid(λ)`.
    Bernoulli,
    /// `ψ(x) = x²`: normal responses with mean `2λ` and variance 2.
    GaussianPaper,
}

impl GlmFamily {
    pub const ALL: [GlmFamily; 4] = [
        GlmFamily::Gaussian,
        GlmFamily::Poisson,
        GlmFamily::Bernoulli,
        GlmFamily::GaussianPaper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GlmFamily::Gaussian => "gaussian",
            GlmFamily::Poisson => "poisson",
            GlmFamily::Bernoulli => "bernoulli",
            GlmFamily::GaussianPaper => "gaussian-paper",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    #[inline]
    pub fn psi(self, x: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => 0.5 * x * x,
            GlmFamily::Poisson => x.exp(),
            GlmFamily::Bernoulli => softplus(x),
            GlmFamily::GaussianPaper => x * x,
        }
    }

    /// Mean of the response at natural parameter `x`.
    #[inline]
    pub fn psi_prime(self, x: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => x,
            GlmFamily::Poisson => x.exp(),
            GlmFamily::Bernoulli => sigmoid(x),
            GlmFamily::GaussianPaper => 2.0 * x,
        }
    }

    /// Variance of the response at natural parameter `x`.
    #[inline]
    pub fn psi_double_prime(self, x: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => 1.0,
            GlmFamily::Poisson => x.exp(),
            GlmFamily::Bernoulli => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            GlmFamily::GaussianPaper => 2.0,
        }
    }

    /// Inverse of the mean map: the natural parameter whose mean is `mu`.
    pub fn psi_prime_inverse(self, mu: f64) -> Result<f64> {
        match self {
            GlmFamily::Gaussian => Ok(mu),
            GlmFamily::GaussianPaper => Ok(0.5 * mu),
            GlmFamily::Poisson => {
                if mu > 0.0 {
                    Ok(mu.ln())
                } else {
                    Err(Error::Domain {
                        what: "poisson inverse mean map",
                        value: mu,
                    })
                }
            }
            GlmFamily::Bernoulli => {
                if mu > 0.0 && mu < 1.0 {
                    Ok((mu / (1.0 - mu)).ln())
                } else {
                    Err(Error::Domain {
                        what: "bernoulli inverse mean map",
                        value: mu,
                    })
                }
            }
        }
    }

    /// Draws one response at natural parameter `lambda`.
    pub fn sample<R: Rng + ?Sized>(self, lambda: f64, rng: &mut R) -> Result<f64> {
        match self {
            GlmFamily::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                Ok(lambda + z)
            }
            GlmFamily::GaussianPaper => {
                let z: f64 = rng.sample(StandardNormal);
                Ok(2.0 * lambda + std::f64::consts::SQRT_2 * z)
            }
            GlmFamily::Poisson => {
                let rate = lambda.exp();
                let dist = Poisson::new(rate).map_err(|_| Error::Domain {
                    what: "poisson rate",
                    value: rate,
                })?;
                Ok(dist.sample(rng))
            }
            GlmFamily::Bernoulli => {
                let dist = Bernoulli::new(sigmoid(lambda)).map_err(|_| Error::Domain {
                    what: "bernoulli probability",
                    value: lambda,
                })?;
                Ok(if dist.sample(rng) { 1.0 } else { 0.0 })
            }
        }
    }
}

impl std::fmt::Display for GlmFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GlmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GlmFamily::from_name(s)
            .ok_or_else(|| Error::InvalidSetting(format!("unknown family `{s}`")))
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Design matrix, observed responses and an optional observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array2<f64>,
    mask: Option<Array2<f64>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array2<f64>, mask: Option<Array2<f64>>) -> Result<Self> {
        let (n, p) = x.dim();
        let (ny, m) = y.dim();
        if n == 0 || p == 0 || m == 0 {
            return Err(Error::InvalidShape(format!(
                "dataset needs n, p, m >= 1 (got n={n}, p={p}, m={m})"
            )));
        }
        if ny != n {
            return Err(Error::ShapeMismatch {
                context: "responses",
                expected: (n, m),
                actual: (ny, m),
            });
        }
        check_finite(x.view())?;
        if let Some(mask) = &mask {
            if mask.dim() != y.dim() {
                return Err(Error::ShapeMismatch {
                    context: "mask",
                    expected: y.dim(),
                    actual: mask.dim(),
                });
            }
            for ((row, col), &value) in mask.indexed_iter() {
                if value != 0.0 && value != 1.0 {
                    return Err(Error::InvalidMask { row, col, value });
                }
            }
            // Unobserved cells may hold anything (NaN placeholders included).
            for ((row, col), &value) in y.indexed_iter() {
                if mask[[row, col]] == 1.0 && !value.is_finite() {
                    return Err(Error::NonFinite { row, col });
                }
            }
        } else {
            check_finite(y.view())?;
        }
        Ok(Dataset { x, y, mask })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }

    pub fn mask(&self) -> Option<ArrayView2<'_, f64>> {
        self.mask.as_ref().map(|m| m.view())
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.y.ncols()
    }

    /// Weight of response cell `(i, l)`: the mask entry, or 1 without a mask.
    #[inline]
    pub fn weight(&self, i: usize, l: usize) -> f64 {
        match &self.mask {
            Some(mask) => mask[[i, l]],
            None => 1.0,
        }
    }

    /// Same data with the mask dropped.
    pub fn without_mask(&self) -> Dataset {
        Dataset {
            x: self.x.clone(),
            y: self.y.clone(),
            mask: None,
        }
    }

    /// Same data with a different mask.
    pub fn with_mask(&self, mask: Option<Array2<f64>>) -> Result<Dataset> {
        Dataset::new(self.x.clone(), self.y.clone(), mask)
    }
}

pub(crate) fn check_finite(a: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), v) in a.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

pub(crate) fn check_coefficients(x: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, m: usize) -> Result<()> {
    if b.dim() != (x.ncols(), m) {
        return Err(Error::ShapeMismatch {
            context: "coefficients",
            expected: (x.ncols(), m),
            actual: b.dim(),
        });
    }
    Ok(())
}

/// Draws `Y♯[i, l]` at `λ = x_iᵀ b_l` (row-major order from one seeded stream),
/// then returns `Π Y♯`: row `i` of the result is row `perm(i)` of `Y♯`.
pub fn sample_responses(
    family: GlmFamily,
    x: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
    perm: &Permutation,
    seed: u64,
) -> Result<Array2<f64>> {
    let n = x.nrows();
    if b.nrows() != x.ncols() {
        return Err(Error::ShapeMismatch {
            context: "coefficients",
            expected: (x.ncols(), b.ncols()),
            actual: b.dim(),
        });
    }
    if perm.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: perm.len(),
        });
    }
    let lambda = x.dot(&b);
    let mut rng = seeded_rng(seed);
    let mut unshuffled = Array2::zeros(lambda.dim());
    for (out, &l) in unshuffled.iter_mut().zip(lambda.iter()) {
        *out = family.sample(l, &mut rng)?;
    }
    Ok(perm.apply_rows(unshuffled.view()))
}
