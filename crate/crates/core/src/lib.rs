//! Estimation of regression coefficients and the unknown row permutation in
//! generalized linear models whose responses arrive shuffled, `Y = Π♯Y♯`.
//!
//! The building blocks are exponential-family kernels ([`glm`]), an exact
//! assignment solver ([`assignment`]), the likelihood and its permutation cost
//! matrix ([`likelihood`]) and a damped-Newton coefficient fit ([`fit`]).
//! [`estimators`] composes them into the known-coefficient, two-step, warm
//! start and alternating maximum-likelihood procedures, including versions for
//! partially observed responses backed by [`soft_impute`]. [`diagnostics`]
//! evaluates the recovery-condition quantities, [`admm`] holds linear-model
//! baselines and [`sim`] drives Monte-Carlo recovery experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod admm;
pub mod assignment;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod fit;
pub mod glm;
pub mod likelihood;
pub mod linalg;
pub mod permutation;
pub mod random;
pub mod sim;
pub mod soft_impute;

pub use assignment::{solve_max, solve_min, CostMatrix};
pub use error::{Error, Result};
pub use glm::{sample_responses, Coefficients, Dataset, GlmFamily};
pub use likelihood::{cost_matrix, log_likelihood, population_likelihood, LikelihoodContext};
pub use permutation::{random_with_displacement, Permutation};
