//! Simulation settings, the replication runner and recovery-curve output.

use std::collections::HashSet;
use std::fmt::Write as _;

use log::debug;
use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{admm_recover, warm_start_linear, AdmmSettings, LinearInit};
use crate::error::{Error, Result};
use crate::estimators::{ml_with_warm_start, recover_known_b, two_step, EstimatorSettings};
use crate::glm::{sample_responses, Coefficients, Dataset, GlmFamily};
use crate::likelihood::LikelihoodContext;
use crate::permutation::{random_with_displacement, Permutation};
use crate::random::{mix_seed, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignSetting {
    /// Rows i.i.d. `N(0, I_p / p)`.
    GaussianDesign,
    /// Intercept plus every binary pattern over `p − 1` columns; `n = 2^{p−1}`.
    CompleteDesign,
    /// Exactly `s` nonzeros per row at distinct supports.
    SparseDesign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[serde(alias = "known_B")]
    KnownB,
    TwoStep,
    Ml,
    MlMissing,
    AdmmLinear,
    AdmmLogtrans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdmmStart {
    #[default]
    Identity,
    Averaging,
    Eigen,
}

fn default_replications() -> usize {
    50
}

fn default_q() -> f64 {
    1.0
}

fn default_sparse_s() -> usize {
    5
}

fn default_sparse_range() -> (f64, f64) {
    (0.5, 1.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub setting: DesignSetting,
    pub family: GlmFamily,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    #[serde(default = "default_sparse_s")]
    pub sparse_s: usize,
    /// Nonzero design values of the sparse setting are drawn from `U(lo, hi)`.
    #[serde(default = "default_sparse_range")]
    pub sparse_range: (f64, f64),
    /// Number of displaced labels.
    pub h: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    pub estimator: EstimatorKind,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub settings: EstimatorSettings,
    #[serde(default)]
    pub admm: AdmmSettings,
    #[serde(default)]
    pub admm_start: AdmmStart,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSetting(msg));
        if self.n == 0 || self.p == 0 || self.m == 0 {
            return bad("n, p and m must be positive".into());
        }
        if self.p > self.n {
            return bad(format!("p = {} exceeds n = {}; the model is not identifiable", self.p, self.n));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return bad(format!("q = {} is outside (0, 1]", self.q));
        }
        if self.h == 1 || self.h > self.n {
            return Err(Error::InvalidDisplacement { n: self.n, h: self.h });
        }
        if self.replications == 0 {
            return bad("replications must be positive".into());
        }
        match self.setting {
            DesignSetting::CompleteDesign => {
                if self.p > 63 || self.n != 1usize << (self.p - 1) {
                    return Err(Error::InvalidShape(format!(
                        "complete design needs n = 2^(p-1); got n = {}, p = {}",
                        self.n, self.p
                    )));
                }
            }
            DesignSetting::SparseDesign => {
                if self.sparse_s == 0 || self.sparse_s > self.p {
                    return bad(format!("sparse_s = {} must lie in 1..={}", self.sparse_s, self.p));
                }
                if !binomial_at_least(self.p, self.sparse_s, self.n) {
                    return Err(Error::InvalidShape(format!(
                        "only C({}, {}) distinct supports for {} rows",
                        self.p, self.sparse_s, self.n
                    )));
                }
                let (lo, hi) = self.sparse_range;
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return bad("sparse_range must be an increasing finite pair".into());
                }
            }
            DesignSetting::GaussianDesign => {}
        }
        if matches!(self.estimator, EstimatorKind::AdmmLinear | EstimatorKind::AdmmLogtrans) {
            if self.q < 1.0 {
                return bad("the ADMM baselines need fully observed responses (q = 1)".into());
            }
            self.admm.validate()?;
        }
        self.settings.validate()
    }
}

fn binomial_at_least(p: usize, s: usize, target: usize) -> bool {
    // C(p, k+1) = C(p, k)·(p − k)/(k + 1) stays integral at every step.
    let mut c: u128 = 1;
    for k in 0..s {
        c = c * (p - k) as u128 / (k + 1) as u128;
    }
    c >= target as u128
}

/// Design matrix for a setting. The complete design ignores the seed.
pub fn generate_design(setting: DesignSetting, n: usize, p: usize, sparse_s: usize, seed: u64) -> Result<Array2<f64>> {
    generate_design_with_range(setting, n, p, sparse_s, default_sparse_range(), seed)
}

pub fn generate_design_with_range(
    setting: DesignSetting,
    n: usize,
    p: usize,
    sparse_s: usize,
    sparse_range: (f64, f64),
    seed: u64,
) -> Result<Array2<f64>> {
    let mut rng = seeded_rng(seed);
    match setting {
        DesignSetting::GaussianDesign => {
            let scale = 1.0 / (p as f64).sqrt();
            Ok(Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(StandardNormal) * scale))
        }
        DesignSetting::CompleteDesign => {
            if p == 0 || p > 63 || n != 1usize << (p - 1) {
                return Err(Error::InvalidShape(format!("complete design needs n = 2^(p-1); got n = {n}, p = {p}")));
            }
            Ok(Array2::from_shape_fn((n, p), |(i, j)| if j == 0 { 1.0 } else { ((i >> (j - 1)) & 1) as f64 }))
        }
        DesignSetting::SparseDesign => {
            if sparse_s == 0 || sparse_s > p || !binomial_at_least(p, sparse_s, n) {
                return Err(Error::InvalidShape(format!("cannot place {n} distinct {sparse_s}-sparse supports in {p} columns")));
            }
            let (lo, hi) = sparse_range;
            let mut seen = HashSet::with_capacity(n);
            let mut x = Array2::zeros((n, p));
            let mut i = 0;
            while i < n {
                let mut support = sample(&mut rng, p, sparse_s).into_vec();
                support.sort_unstable();
                if !seen.insert(support.clone()) {
                    continue;
                }
                for j in support {
                    x[[i, j]] = rng.random_range(lo..hi);
                }
                i += 1;
            }
            Ok(x)
        }
    }
}

/// Coefficients as the settings prescribe: standard normal for the Gaussian
/// design, `U(0, 2)` otherwise.
pub fn generate_coefficients(setting: DesignSetting, p: usize, m: usize, seed: u64) -> Coefficients {
    let mut rng = seeded_rng(seed);
    match setting {
        DesignSetting::GaussianDesign => Array2::from_shape_fn((p, m), |_| rng.sample(StandardNormal)),
        _ => Array2::from_shape_fn((p, m), |_| rng.random_range(0.0..2.0)),
    }
}

/// I.i.d. Bernoulli(q) observation mask.
pub fn generate_mask(n: usize, m: usize, q: f64, seed: u64) -> Array2<f64> {
    let mut rng = seeded_rng(seed);
    Array2::from_shape_fn((n, m), |_| if rng.random_bool(q) { 1.0 } else { 0.0 })
}

/// One simulated data set with its ground truth.
#[derive(Debug, Clone)]
pub struct Replicate {
    pub data: Dataset,
    pub b_true: Coefficients,
    pub perm_true: Permutation,
}

const STREAM_DESIGN: u64 = 1;
const STREAM_COEFFICIENTS: u64 = 2;
const STREAM_PERMUTATION: u64 = 3;
const STREAM_RESPONSES: u64 = 4;
const STREAM_MASK: u64 = 5;

/// Draws a data set for `spec` from `seed`. A mask is attached when `q < 1`
/// or the estimator is the missing-data one.
pub fn generate_replicate(spec: &ExperimentSpec, seed: u64) -> Result<Replicate> {
    let x = generate_design_with_range(
        spec.setting,
        spec.n,
        spec.p,
        spec.sparse_s,
        spec.sparse_range,
        mix_seed(seed, &[STREAM_DESIGN]),
    )?;
    let b = generate_coefficients(spec.setting, spec.p, spec.m, mix_seed(seed, &[STREAM_COEFFICIENTS]));
    let perm = if spec.h == 0 {
        Permutation::identity(spec.n)
    } else {
        random_with_displacement(spec.n, spec.h, mix_seed(seed, &[STREAM_PERMUTATION]))?
    };
    let y = sample_responses(spec.family, x.view(), b.view(), &perm, mix_seed(seed, &[STREAM_RESPONSES]))?;
    let mask = if spec.q < 1.0 || spec.estimator == EstimatorKind::MlMissing {
        Some(generate_mask(spec.n, spec.m, spec.q, mix_seed(seed, &[STREAM_MASK])))
    } else {
        None
    };
    Ok(Replicate {
        data: Dataset::new(x, y, mask)?,
        b_true: b,
        perm_true: perm,
    })
}

/// Runs the configured estimator on one replicate.
pub fn estimate(spec: &ExperimentSpec, rep: &Replicate) -> Result<Permutation> {
    let ctx = LikelihoodContext::new(spec.family, &rep.data);
    match spec.estimator {
        EstimatorKind::KnownB => recover_known_b(&ctx, rep.b_true.view()),
        EstimatorKind::TwoStep => Ok(two_step(&ctx, &spec.settings)?.perm_hat),
        EstimatorKind::Ml | EstimatorKind::MlMissing => Ok(ml_with_warm_start(&ctx, &spec.settings)?.perm_hat),
        EstimatorKind::AdmmLinear => admm_baseline(spec, rep.data.x(), rep.data.y().to_owned()),
        EstimatorKind::AdmmLogtrans => {
            let y = rep.data.y().mapv(|v| (v + 1.0).ln());
            if let Some(((row, col), _)) = y.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite { row, col });
            }
            admm_baseline(spec, rep.data.x(), y)
        }
    }
}

fn admm_baseline(spec: &ExperimentSpec, x: ndarray::ArrayView2<'_, f64>, y: Array2<f64>) -> Result<Permutation> {
    let init = match spec.admm_start {
        AdmmStart::Identity => None,
        AdmmStart::Averaging => Some(warm_start_linear(x, y.view(), LinearInit::Averaging)?),
        AdmmStart::Eigen => Some(warm_start_linear(x, y.view(), LinearInit::Eigen)?),
    };
    let settings = AdmmSettings {
        init,
        ..spec.admm.clone()
    };
    Ok(admm_recover(x, y.view(), &settings)?.perm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    M,
    H,
    /// `h = round(value · n)`, bumped to 2 if that rounds to 1.
    HFrac,
    Q,
    P,
    N,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::M => "m",
            SweepParameter::H => "h",
            SweepParameter::HFrac => "h_frac",
            SweepParameter::Q => "q",
            SweepParameter::P => "p",
            SweepParameter::N => "n",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidSetting(format!("{what} grid value {v} is not a nonnegative integer")))
    }
}

impl Sweep {
    /// The experiment at one grid value.
    pub fn apply(&self, spec: &ExperimentSpec, value: f64) -> Result<ExperimentSpec> {
        let mut s = spec.clone();
        match self.parameter {
            SweepParameter::M => s.m = as_count(value, "m")?,
            SweepParameter::H => s.h = as_count(value, "h")?,
            SweepParameter::HFrac => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::InvalidSetting(format!("h fraction {value} is outside [0, 1]")));
                }
                let h = (value * s.n as f64).round() as usize;
                s.h = if h == 1 { 2 } else { h };
            }
            SweepParameter::Q => s.q = value,
            SweepParameter::P => s.p = as_count(value, "p")?,
            SweepParameter::N => s.n = as_count(value, "n")?,
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCurve {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub success_rate: Vec<f64>,
    /// Mean of `hamming(Π̂, Π♯) / n`; failed replicates count as 1.
    pub mean_hamming_error: Vec<f64>,
    /// Binomial standard error of the success rate.
    pub stderr: Vec<f64>,
    /// Replicates whose estimator returned an error, per grid point.
    pub failures: Vec<usize>,
    pub replications: usize,
}

struct Outcome {
    success: bool,
    hamming_fraction: f64,
    failed: bool,
}

fn run_one(spec: &ExperimentSpec, point: usize, r: usize) -> Outcome {
    let seed = mix_seed(spec.base_seed, &[point as u64, r as u64]);
    let result = generate_replicate(spec, seed).and_then(|rep| {
        let est = estimate(spec, &rep)?;
        let d = est.hamming(&rep.perm_true)?;
        Ok(d)
    });
    match result {
        Ok(d) => Outcome {
            success: d == 0,
            hamming_fraction: d as f64 / spec.n as f64,
            failed: false,
        },
        Err(e) => {
            debug!("replicate {r} at grid point {point} failed: {e}");
            Outcome {
                success: false,
                hamming_fraction: 1.0,
                failed: true,
            }
        }
    }
}

/// Runs every replicate at every grid value. Replicate `r` at grid index `g`
/// is seeded by `mix_seed(base_seed, [g, r])`, so results do not depend on
/// scheduling.
pub fn run_experiment(spec: &ExperimentSpec, sweep: &Sweep) -> Result<RecoveryCurve> {
    if sweep.grid.is_empty() {
        return Err(Error::InvalidSetting("sweep grid is empty".into()));
    }
    let specs: Vec<ExperimentSpec> = sweep.grid.iter().map(|&v| sweep.apply(spec, v)).collect::<Result<_>>()?;
    let reps = spec.replications;
    let jobs: Vec<(usize, usize)> = (0..specs.len()).flat_map(|g| (0..reps).map(move |r| (g, r))).collect();
    let outcomes: Vec<Outcome> = jobs.par_iter().map(|&(g, r)| run_one(&specs[g], g, r)).collect();

    let mut curve = RecoveryCurve {
        parameter: sweep.parameter,
        grid: sweep.grid.clone(),
        success_rate: Vec::new(),
        mean_hamming_error: Vec::new(),
        stderr: Vec::new(),
        failures: Vec::new(),
        replications: reps,
    };
    for chunk in outcomes.chunks(reps) {
        let rate = chunk.iter().filter(|o| o.success).count() as f64 / reps as f64;
        curve.success_rate.push(rate);
        curve.stderr.push((rate * (1.0 - rate) / reps as f64).sqrt());
        curve
            .mean_hamming_error
            .push(chunk.iter().map(|o| o.hamming_fraction).sum::<f64>() / reps as f64);
        curve.failures.push(chunk.iter().filter(|o| o.failed).count());
    }
    Ok(curve)
}

/// The correctly specified ML curve next to ADMM fitted to `Y` ("linear")
/// and to `log(Y + 1)` ("log-trans"), all on identical replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisspecificationCurves {
    pub ml: RecoveryCurve,
    pub linear: RecoveryCurve,
    pub log_trans: RecoveryCurve,
}

pub fn misspecification_baselines(spec: &ExperimentSpec, sweep: &Sweep) -> Result<MisspecificationCurves> {
    let with = |estimator| ExperimentSpec {
        estimator,
        ..spec.clone()
    };
    Ok(MisspecificationCurves {
        ml: run_experiment(&with(EstimatorKind::Ml), sweep)?,
        linear: run_experiment(&with(EstimatorKind::AdmmLinear), sweep)?,
        log_trans: run_experiment(&with(EstimatorKind::AdmmLogtrans), sweep)?,
    })
}

impl RecoveryCurve {
    /// `grid,success_rate,stderr,mean_hamming`, one header line, values in
    /// shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("grid,success_rate,stderr,mean_hamming\n");
        for k in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.grid[k], self.success_rate[k], self.stderr[k], self.mean_hamming_error[k]
            );
        }
        out
    }

    /// Grid value where the success rate first crosses `level` from below,
    /// by linear interpolation.
    pub fn crossing(&self, level: f64) -> Option<f64> {
        for k in 1..self.grid.len() {
            let (a, b) = (self.success_rate[k - 1], self.success_rate[k]);
            if a < level && b >= level {
                let t = (level - a) / (b - a);
                return Some(self.grid[k - 1] + t * (self.grid[k] - self.grid[k - 1]));
            }
        }
        None
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Success-rate polylines on shared axes.
pub fn curves_to_svg(title: &str, curves: &[(&str, &RecoveryCurve)]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 400.0, 60.0, 20.0, 40.0, 50.0);
    let xs: Vec<f64> = curves.iter().flat_map(|(_, c)| c.grid.iter().copied()).collect();
    let (mut x0, mut x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let px = |v: f64| left + (v - x0) / (x1 - x0) * (w - left - right);
    let py = |v: f64| top + (1.0 - v) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let (ax0, ax1, ay0, ay1) = (left, w - right, top, h - bottom);
    let _ = writeln!(s, r#"<line x1="{ax0}" y1="{ay1}" x2="{ax1}" y2="{ay1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{ax0}" y1="{ay0}" x2="{ax0}" y2="{ay1}" stroke="black"/>"#);
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{ax0}" y2="{y}" stroke="black"/>"#, ax0 - 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#, ax0 - 6.0, y + 4.0);
        let xv = x0 + v * (x1 - x0);
        let x = px(xv);
        let _ = writeln!(s, r#"<line x1="{x}" y1="{ay1}" x2="{x}" y2="{}" stroke="black"/>"#, ay1 + 4.0);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, ay1 + 18.0, format_tick(xv));
    }
    if let Some((_, c)) = curves.first() {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (ax0 + ax1) / 2.0, h - 10.0, c.parameter.name());
    }
    let _ = writeln!(s, r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">success rate</text>"#, (ay0 + ay1) / 2.0, (ay0 + ay1) / 2.0);
    for (k, (name, c)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = c
            .grid
            .iter()
            .zip(&c.success_rate)
            .map(|(&g, &r)| format!("{:.2},{:.2}", px(g), py(r)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, points.join(" "));
        let ly = top + 16.0 * k as f64 + 10.0;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, ax1 - 120.0, ax1 - 100.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, ax1 - 95.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Column sample variances, used by the design checks.
pub fn column_variances(x: &Array2<f64>) -> Array1<f64> {
    let n = x.nrows() as f64;
    let mean = x.sum_axis(ndarray::Axis(0)) / n;
    let mut var = Array1::zeros(x.ncols());
    for row in x.rows() {
        var = var + (&row - &mean).mapv(|v| v * v);
    }
    var / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spec(estimator: EstimatorKind) -> ExperimentSpec {
        ExperimentSpec {
            setting: DesignSetting::GaussianDesign,
            family: GlmFamily::Poisson,
            n: 32,
            p: 3,
            m: 40,
            sparse_s: 5,
            sparse_range: (0.5, 1.5),
            h: 8,
            q: 1.0,
            estimator,
            replications: 6,
            base_seed: 11,
            settings: EstimatorSettings::default(),
            admm: AdmmSettings::default(),
            admm_start: AdmmStart::Identity,
        }
    }

    #[test]
    fn complete_design_layout() {
        let x = generate_design(DesignSetting::CompleteDesign, 4, 3, 0, 0).unwrap();
        assert_eq!(x, array![[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0]]);
        assert!(generate_design(DesignSetting::CompleteDesign, 5, 3, 0, 0).is_err());
    }

    #[test]
    fn gaussian_design_variance() {
        let x = generate_design(DesignSetting::GaussianDesign, 10_000, 4, 0, 3).unwrap();
        for v in column_variances(&x).iter() {
            // Sample variance of 10⁴ normals: relative sd about 1.4%.
            assert!((v - 0.25).abs() < 0.25 * 0.06, "{v}");
        }
    }

    #[test]
    fn sparse_design_supports() {
        let x = generate_design(DesignSetting::SparseDesign, 256, 20, 5, 9).unwrap();
        let mut seen = HashSet::new();
        for row in x.rows() {
            let support: Vec<usize> = row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j).collect();
            assert_eq!(support.len(), 5);
            assert!(row.iter().all(|&v| v == 0.0 || (0.5..1.5).contains(&v)));
            assert!(seen.insert(support));
        }
        assert!(generate_design(DesignSetting::SparseDesign, 11, 4, 2, 0).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(EstimatorKind::Ml);
        assert!(s.validate().is_ok());
        s.h = 1;
        assert!(s.validate().is_err());
        s.h = 0;
        s.q = 0.0;
        assert!(s.validate().is_err());
        s.q = 1.0;
        s.p = 40;
        assert!(s.validate().is_err());
        let json = r#"{"setting":"gaussian_design","family":"poisson","n":8,"p":2,"m":3,"h":2,"estimator":"ml","bogus":1}"#;
        assert!(serde_json::from_str::<ExperimentSpec>(json).is_err());
        let json = r#"{"setting":"gaussian_design","family":"poisson","n":8,"p":2,"m":3,"h":2,"estimator":"known_B"}"#;
        let parsed: ExperimentSpec = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.estimator, EstimatorKind::KnownB);
        assert_eq!(parsed.replications, 50);
    }

    #[test]
    fn sweep_application() {
        let s = spec(EstimatorKind::Ml);
        let sweep = Sweep {
            parameter: SweepParameter::HFrac,
            grid: vec![0.0, 0.03, 0.25],
        };
        assert_eq!(sweep.apply(&s, 0.03).unwrap().h, 2);
        assert_eq!(sweep.apply(&s, 0.25).unwrap().h, 8);
        let bad = Sweep {
            parameter: SweepParameter::M,
            grid: vec![2.5],
        };
        assert!(bad.apply(&s, 2.5).is_err());
    }

    #[test]
    fn zero_displacement_is_always_recovered() {
        for est in [EstimatorKind::TwoStep, EstimatorKind::Ml, EstimatorKind::KnownB] {
            // Strong signal: few rows, many responses.
            let mut s = spec(est);
            s.n = 12;
            s.h = 0;
            s.m = 600;
            let sweep = Sweep {
                parameter: SweepParameter::H,
                grid: vec![0.0],
            };
            let c = run_experiment(&s, &sweep).unwrap();
            assert_eq!(c.success_rate, vec![1.0], "{est:?}");
            assert_eq!(c.stderr, vec![0.0]);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let s = spec(EstimatorKind::Ml);
        let sweep = Sweep {
            parameter: SweepParameter::M,
            grid: vec![4.0, 40.0],
        };
        let a = run_experiment(&s, &sweep).unwrap();
        let b = run_experiment(&s, &sweep).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.grid.len(), a.success_rate.len());
        assert!(a.success_rate.iter().all(|r| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn failures_are_counted_not_fatal() {
        // log(Y + 1) of Gaussian responses below −1 is undefined.
        let mut s = spec(EstimatorKind::AdmmLogtrans);
        s.family = GlmFamily::Gaussian;
        s.m = 20;
        let sweep = Sweep {
            parameter: SweepParameter::M,
            grid: vec![20.0],
        };
        let c = run_experiment(&s, &sweep).unwrap();
        assert_eq!(c.failures, vec![6]);
        assert_eq!(c.success_rate, vec![0.0]);
        assert_eq!(c.mean_hamming_error, vec![1.0]);
    }

    #[test]
    fn well_specified_linear_baseline_tracks_ml() {
        let mut s = spec(EstimatorKind::Ml);
        s.family = GlmFamily::Gaussian;
        s.m = 30;
        let sweep = Sweep {
            parameter: SweepParameter::M,
            grid: vec![30.0],
        };
        let curves = misspecification_baselines(&s, &sweep).unwrap();
        assert!((curves.ml.success_rate[0] - curves.linear.success_rate[0]).abs() <= 0.35);
    }

    #[test]
    fn csv_and_svg_shapes() {
        let c = RecoveryCurve {
            parameter: SweepParameter::M,
            grid: vec![8.0, 16.0],
            success_rate: vec![0.0, 0.5],
            mean_hamming_error: vec![0.25, 0.1],
            stderr: vec![0.0, 0.1],
            failures: vec![0, 0],
            replications: 25,
        };
        assert_eq!(c.to_csv(), "grid,success_rate,stderr,mean_hamming\n8,0,0,0.25\n16,0.5,0.1,0.1\n");
        assert_eq!(c.crossing(0.5), Some(16.0));
        let svg = curves_to_svg("t", &[("ml", &c)]);
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    }
}
