use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::warn;
use serde::{Deserialize, Serialize};
use shuffled_glm::admm::{admm_recover, warm_start_linear, AdmmSettings, LinearInit};
use shuffled_glm::diagnostics::{pairwise, pairwise_missing, PairwiseDiagnostics};
use shuffled_glm::estimators::{ml_with_warm_start, recover_known_b, two_step, unobserved_rows, EstimatorSettings, FitReport};
use shuffled_glm::sim::{curves_to_svg, misspecification_baselines, run_experiment, AdmmStart, ExperimentSpec, RecoveryCurve, Sweep};
use shuffled_glm::{log_likelihood, Dataset, GlmFamily, LikelihoodContext};

use crate::matrix_io::{read_matrix, write_indices, write_matrix};
use crate::EstimatorArg;

pub enum Status {
    Converged,
    NotConverged,
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Converged
    } else {
        Status::NotConverged
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("{}: cannot read", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: invalid configuration", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("{}: cannot write", path.display()))
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("{}: cannot create output directory", out.display()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub estimator: EstimatorSettings,
    pub admm: AdmmSettings,
    pub admm_start: AdmmStart,
}

pub struct FitArgs {
    pub x: PathBuf,
    pub y: PathBuf,
    pub mask: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub family: GlmFamily,
    pub estimator: EstimatorArg,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn fit(args: &FitArgs) -> Result<Status> {
    let config: FitConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => FitConfig::default(),
    };
    config.estimator.validate()?;
    let x = read_matrix(&args.x)?;
    let y = read_matrix(&args.y)?;
    if x.nrows() != y.nrows() {
        bail!(
            "{} has {} rows but {} has {}",
            args.x.display(),
            x.nrows(),
            args.y.display(),
            y.nrows()
        );
    }
    let mask = match &args.mask {
        Some(p) => {
            let m = read_matrix(p)?;
            if m.dim() != y.dim() {
                bail!("{}: mask is {:?} but responses are {:?}", p.display(), m.dim(), y.dim());
            }
            Some(m)
        }
        None => None,
    };
    let data = Dataset::new(x, y, mask).context("invalid input data")?;
    let ctx = LikelihoodContext::new(args.family, &data);
    prepare_out(&args.out)?;

    if args.estimator == EstimatorArg::Admm {
        if data.mask().is_some() {
            bail!("the admm estimator needs fully observed responses; drop --mask");
        }
        let init = match config.admm_start {
            AdmmStart::Identity => None,
            AdmmStart::Averaging => Some(warm_start_linear(data.x(), data.y(), LinearInit::Averaging)?),
            AdmmStart::Eigen => Some(warm_start_linear(data.x(), data.y(), LinearInit::Eigen)?),
        };
        let settings = AdmmSettings { init, ..config.admm };
        let outcome = admm_recover(data.x(), data.y(), &settings)?;
        write_indices(&args.out.join("perm.csv"), outcome.perm.as_slice())?;
        write_json(&args.out.join("report.json"), &outcome)?;
        return Ok(status(outcome.converged));
    }

    let report = match args.estimator {
        EstimatorArg::KnownB => {
            let Some(path) = &args.b else {
                bail!("the known-b estimator needs --b");
            };
            let b = read_matrix(path)?;
            if b.dim() != (data.p(), data.m()) {
                bail!(
                    "{}: coefficients are {:?}, expected {:?}",
                    path.display(),
                    b.dim(),
                    (data.p(), data.m())
                );
            }
            let perm = recover_known_b(&ctx, b.view())?;
            let value = log_likelihood(&ctx, &perm, b.view())?;
            FitReport {
                perm_hat: perm,
                b_hat: b,
                likelihood_trace: vec![value],
                outer_iterations: 0,
                converged: true,
                coefficients_converged: true,
                warm_start_perm: None,
                unobserved_rows: unobserved_rows(&ctx),
            }
        }
        EstimatorArg::TwoStep => two_step(&ctx, &config.estimator)?,
        EstimatorArg::Ml => ml_with_warm_start(&ctx, &config.estimator)?,
        EstimatorArg::Admm => unreachable!("handled above"),
    };
    write_indices(&args.out.join("perm.csv"), report.perm_hat.as_slice())?;
    write_matrix(&args.out.join("coefficients.csv"), &report.b_hat)?;
    write_json(&args.out.join("report.json"), &report)?;
    Ok(status(report.converged && report.coefficients_converged))
}

fn default_name() -> String {
    "curve".into()
}

/// A sweep, optionally with the misspecification baselines.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub experiment: ExperimentSpec,
    pub sweep: Sweep,
    /// Also run ADMM on `Y` and on `log(Y + 1)` over the same replicates.
    #[serde(default)]
    pub baselines: bool,
    /// Output file stem inside the output directory.
    #[serde(default = "default_name")]
    pub name: String,
}

pub fn simulate(config_path: &Path, seed: Option<u64>, plot: bool, out: &Path) -> Result<Status> {
    let mut config: SimulateConfig = read_json(config_path)?;
    if let Some(seed) = seed {
        config.experiment.base_seed = seed;
    }
    if config.name.is_empty() || config.name.contains(['/', '\\']) {
        bail!("{}: name must be a plain file stem", config_path.display());
    }
    config
        .experiment
        .validate()
        .with_context(|| format!("{}: invalid experiment", config_path.display()))?;
    prepare_out(out)?;
    let stem = &config.name;
    let curves: Vec<(String, RecoveryCurve)> = if config.baselines {
        let c = misspecification_baselines(&config.experiment, &config.sweep)?;
        vec![
            (format!("{stem}_ml"), c.ml),
            (format!("{stem}_linear"), c.linear),
            (format!("{stem}_log_trans"), c.log_trans),
        ]
    } else {
        vec![(stem.clone(), run_experiment(&config.experiment, &config.sweep)?)]
    };
    for (name, curve) in &curves {
        let path = out.join(format!("{name}.csv"));
        fs::write(&path, curve.to_csv()).with_context(|| format!("{}: cannot write", path.display()))?;
        let failed: usize = curve.failures.iter().sum();
        if failed > 0 {
            warn!("{name}: {failed} replicates failed and were counted as misses");
        }
    }
    if plot {
        let named: Vec<(&str, &RecoveryCurve)> = curves.iter().map(|(n, c)| (n.as_str(), c)).collect();
        let path = out.join(format!("{stem}.svg"));
        fs::write(&path, curves_to_svg(stem, &named)).with_context(|| format!("{}: cannot write", path.display()))?;
    }
    Ok(Status::Converged)
}

#[derive(Debug, Serialize)]
struct Summary {
    min: f64,
    median: f64,
    max: f64,
}

fn off_diagonal_summary(m: &ndarray::Array2<f64>) -> Option<Summary> {
    let mut v: Vec<f64> = m.indexed_iter().filter(|((i, j), _)| i != j).map(|(_, &x)| x).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    let median = if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) };
    Some(Summary {
        min: v[0],
        median,
        max: v[k - 1],
    })
}

#[derive(Debug, Serialize)]
struct GapReport {
    delta: Option<Summary>,
    variance: Option<Summary>,
    theorem1_bound: f64,
}

impl From<&PairwiseDiagnostics> for GapReport {
    fn from(d: &PairwiseDiagnostics) -> Self {
        GapReport {
            delta: off_diagonal_summary(&d.delta),
            variance: off_diagonal_summary(&d.variance),
            theorem1_bound: d.theorem1_bound,
        }
    }
}

#[derive(Debug, Serialize)]
struct MaskedReport {
    q: f64,
    #[serde(flatten)]
    gaps: GapReport,
}

#[derive(Debug, Serialize)]
struct DiagnoseReport {
    family: GlmFamily,
    n: usize,
    p: usize,
    m: usize,
    #[serde(flatten)]
    gaps: GapReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    masked: Option<MaskedReport>,
}

/// Recovery is not assured with high probability above this bound.
const BOUND_WARNING: f64 = 0.05;

pub fn diagnose(x_path: &Path, b_path: &Path, family: GlmFamily, q: Option<f64>, out: &Path) -> Result<Status> {
    let x = read_matrix(x_path)?;
    let b = read_matrix(b_path)?;
    if b.nrows() != x.ncols() {
        bail!(
            "{}: coefficients have {} rows but {} has {} columns",
            b_path.display(),
            b.nrows(),
            x_path.display(),
            x.ncols()
        );
    }
    let full = pairwise(family, x.view(), b.view())?;
    if full.theorem1_bound > BOUND_WARNING {
        warn!("recovery bound {} exceeds {BOUND_WARNING}", full.theorem1_bound);
    }
    let masked = match q {
        Some(q) => {
            let d = pairwise_missing(family, x.view(), b.view(), q)?;
            if d.theorem1_bound > BOUND_WARNING {
                warn!("recovery bound at q = {q} is {}, above {BOUND_WARNING}", d.theorem1_bound);
            }
            Some(MaskedReport { q, gaps: (&d).into() })
        }
        None => None,
    };
    let report = DiagnoseReport {
        family,
        n: x.nrows(),
        p: x.ncols(),
        m: b.ncols(),
        gaps: (&full).into(),
        masked,
    };
    prepare_out(out)?;
    write_json(&out.join("diagnostics.json"), &report)?;
    Ok(Status::Converged)
}
