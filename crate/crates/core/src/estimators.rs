//! End-to-end permutation estimators.
//!
//! Every `Π`-step is an exact assignment on [`cost_matrix`], and every
//! `B`-step a monotone Newton ascent, so the alternating procedure never
//! lowers the likelihood. Each step is additionally guarded: a candidate that
//! evaluates lower than the incumbent (possible only through rounding) is
//! rejected, which keeps recorded traces exactly non-decreasing.

use log::warn;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_max, solve_min, CostMatrix};
use crate::error::{Error, Result};
use crate::fit::{fit_matrix_from, NewtonSettings};
use crate::glm::{Coefficients, GlmFamily};
use crate::likelihood::{cost_matrix, log_likelihood, LikelihoodContext};
use crate::permutation::Permutation;
use crate::soft_impute::{soft_impute, ImputeSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSettings {
    pub newton: NewtonSettings,
    pub impute: ImputeSettings,
    /// Cap on alternating sweeps.
    pub max_outer: usize,
    /// Stop once a sweep improves the likelihood by less than this fraction.
    pub rel_tol: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            newton: NewtonSettings::default(),
            impute: ImputeSettings::default(),
            max_outer: 50,
            rel_tol: 1e-9,
        }
    }
}

impl EstimatorSettings {
    pub fn validate(&self) -> Result<()> {
        self.newton.validate()?;
        self.impute.validate()?;
        if self.max_outer < 1 {
            return Err(Error::InvalidSetting("max_outer must be >= 1".into()));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidSetting("rel_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Estimated permutation and coefficients with convergence information.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub perm_hat: Permutation,
    pub b_hat: Coefficients,
    /// `L(Π̂, B̂)` after each sweep.
    pub likelihood_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Every column fit of the final `B`-step converged.
    pub coefficients_converged: bool,
    pub warm_start_perm: Option<Permutation>,
    /// Response rows with no observed entry; their placement comes from the
    /// assignment tie-break, not from data.
    pub unobserved_rows: Vec<usize>,
}

/// Response rows whose every cell is masked out.
pub fn unobserved_rows(ctx: &LikelihoodContext<'_>) -> Vec<usize> {
    match ctx.data.mask() {
        Some(mask) => mask
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(_, r)| r.iter().all(|&w| w == 0.0))
            .map(|(i, _)| i)
            .collect(),
        None => Vec::new(),
    }
}

/// `argmax_Π L(Π, B)`, exact.
pub fn recover_known_b(ctx: &LikelihoodContext<'_>, b: ArrayView2<'_, f64>) -> Result<Permutation> {
    Ok(solve_min(&cost_matrix(ctx, b)?).0)
}

/// Maximizes over `Π` given `B`, keeping `incumbent` unless the assignment
/// strictly improves on it.
fn permutation_step(
    ctx: &LikelihoodContext<'_>,
    b: ArrayView2<'_, f64>,
    incumbent: &Permutation,
    incumbent_value: f64,
) -> Result<(Permutation, f64)> {
    let candidate = recover_known_b(ctx, b)?;
    if candidate == *incumbent {
        return Ok((candidate, incumbent_value));
    }
    let value = log_likelihood(ctx, &candidate, b)?;
    if value >= incumbent_value {
        Ok((candidate, value))
    } else {
        Ok((incumbent.clone(), incumbent_value))
    }
}

/// Fits `B` pretending the labels are right, then re-assigns once. Honors the
/// mask in both steps.
pub fn two_step(ctx: &LikelihoodContext<'_>, settings: &EstimatorSettings) -> Result<FitReport> {
    settings.validate()?;
    let identity = Permutation::identity(ctx.data.n());
    let fit = fit_matrix_from(ctx.family, ctx.data, &identity, &settings.newton, None)?;
    let at_identity = log_likelihood(ctx, &identity, fit.b.view())?;
    let (perm, value) = permutation_step(ctx, fit.b.view(), &identity, at_identity)?;
    Ok(FitReport {
        perm_hat: perm,
        coefficients_converged: fit.converged(),
        b_hat: fit.b,
        likelihood_trace: vec![at_identity, value],
        outer_iterations: 1,
        converged: true,
        warm_start_perm: None,
        unobserved_rows: unobserved_rows(ctx),
    })
}

/// Shift applied to responses before inverting the mean map. The mean map of
/// the Bernoulli family only covers (0, 1), so `y + 1` is squeezed to
/// `(y + 1)/3 ∈ {1/3, 2/3}`.
fn warm_start_shift(family: GlmFamily, y: f64) -> f64 {
    match family {
        GlmFamily::Bernoulli => (y + 1.0) / 3.0,
        _ => y + 1.0,
    }
}

/// `(ψ′)⁻¹` of the shifted responses; unobserved cells are set to zero.
pub fn transformed_responses(ctx: &LikelihoodContext<'_>) -> Result<Array2<f64>> {
    let data = ctx.data;
    let y = data.y();
    let mut out = Array2::zeros(y.raw_dim());
    for ((i, l), v) in out.indexed_iter_mut() {
        if data.weight(i, l) != 0.0 {
            *v = ctx.family.psi_prime_inverse(warm_start_shift(ctx.family, y[[i, l]]))?;
        }
    }
    Ok(out)
}

/// `argmax_Π ⟨Π, Y_ψ Y_ψᵀ X Xᵀ⟩` with `Y_ψ = (ψ′)⁻¹(Y + 1)`. Missing cells of
/// `Y_ψ` are filled by soft-impute first.
pub fn warm_start(ctx: &LikelihoodContext<'_>, impute: &ImputeSettings) -> Result<Permutation> {
    let mut y_psi = transformed_responses(ctx)?;
    if let Some(mask) = ctx.data.mask() {
        if mask.iter().any(|&w| w == 0.0) {
            y_psi = soft_impute(y_psi.view(), mask, impute)?.completed;
        }
    }
    let x = ctx.data.x();
    // (Y_ψ (Y_ψᵀ X)) Xᵀ keeps every product thin.
    let c = y_psi.dot(&y_psi.t().dot(&x)).dot(&x.t());
    Ok(solve_max(&CostMatrix::new(c)?).0)
}

/// Alternating maximization from `init`: fit `B` at the current `Π`, then
/// re-assign `Π` at that `B`, until the likelihood stalls, `Π` repeats, or
/// `max_outer` sweeps.
pub fn ml_estimate(ctx: &LikelihoodContext<'_>, init: &Permutation, settings: &EstimatorSettings) -> Result<FitReport> {
    settings.validate()?;
    if init.len() != ctx.data.n() {
        return Err(Error::LengthMismatch {
            expected: ctx.data.n(),
            actual: init.len(),
        });
    }
    let mut perm = init.clone();
    let mut b: Option<Coefficients> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut coefficients_converged = false;
    let mut sweeps = 0;

    while sweeps < settings.max_outer {
        sweeps += 1;
        let fit = fit_matrix_from(ctx.family, ctx.data, &perm, &settings.newton, b.as_ref().map(|b| b.view()))?;
        let mut fitted_value = log_likelihood(ctx, &perm, fit.b.view())?;
        let mut fitted_b = fit.b;
        coefficients_converged = fit.columns.iter().all(|c| c.converged);
        if let (Some(prev_b), Some(&prev)) = (&b, trace.last()) {
            if fitted_value < prev {
                fitted_b = prev_b.clone();
                fitted_value = prev;
            }
        }
        let (next, value) = permutation_step(ctx, fitted_b.view(), &perm, fitted_value)?;
        let previous = trace.last().copied();
        trace.push(value);
        b = Some(fitted_b);
        let repeated = next == perm;
        perm = next;
        let stalled = previous.is_some_and(|prev| value - prev <= settings.rel_tol * prev.abs());
        if repeated || stalled {
            converged = true;
            break;
        }
    }

    Ok(FitReport {
        perm_hat: perm,
        b_hat: b.expect("at least one sweep"),
        likelihood_trace: trace,
        outer_iterations: sweeps,
        converged,
        coefficients_converged,
        warm_start_perm: None,
        unobserved_rows: unobserved_rows(ctx),
    })
}

/// Warm start followed by alternating maximization, every step masked. Also
/// the plain warm-started estimator when the data carry no mask.
pub fn ml_estimate_missing(ctx: &LikelihoodContext<'_>, settings: &EstimatorSettings) -> Result<FitReport> {
    settings.validate()?;
    let start = warm_start(ctx, &settings.impute)?;
    let mut report = ml_estimate(ctx, &start, settings)?;
    report.warm_start_perm = Some(start);
    if !report.unobserved_rows.is_empty() {
        warn!(
            "{} response rows have no observed entries; their labels are not identified",
            report.unobserved_rows.len()
        );
    }
    Ok(report)
}

/// Warm start followed by alternating maximization.
pub fn ml_with_warm_start(ctx: &LikelihoodContext<'_>, settings: &EstimatorSettings) -> Result<FitReport> {
    ml_estimate_missing(ctx, settings)
}
