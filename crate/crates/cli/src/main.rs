mod commands;
mod matrix_io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use shuffled_glm::GlmFamily;

#[derive(Parser)]
#[command(name = "shuffled-glm", version, about = "Label recovery for generalized linear models with shuffled responses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Poisson,
    Bernoulli,
    GaussianPaper,
}

impl From<FamilyArg> for GlmFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => GlmFamily::Gaussian,
            FamilyArg::Poisson => GlmFamily::Poisson,
            FamilyArg::Bernoulli => GlmFamily::Bernoulli,
            FamilyArg::GaussianPaper => GlmFamily::GaussianPaper,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    KnownB,
    TwoStep,
    Ml,
    Admm,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the permutation (and coefficients) from a design and responses.
    Fit {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// 0/1 matrix marking observed responses.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Coefficients, required by the known-b estimator.
        #[arg(long)]
        b: Option<PathBuf>,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, value_enum, default_value = "ml")]
        estimator: EstimatorArg,
        /// JSON estimator settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a simulation sweep and write its recovery curve.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the configured base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write an SVG plot.
        #[arg(long)]
        plot: bool,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Pairwise gaps, variances and the perfect-recovery bound for a design
    /// and coefficients.
    Diagnose {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Observation rate for the masked analogues.
        #[arg(long)]
        q: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn configure_threads() {
    if let Ok(v) = std::env::var("SHUFFLED_GLM_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("cannot size the worker pool: {e}");
                }
            }
            _ => log::warn!("ignoring SHUFFLED_GLM_THREADS={v:?}; expected a positive integer"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Exit code 2 is reserved for non-convergence; usage errors are input errors.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => e.exit(),
    };
    configure_threads();
    let result = match cli.command {
        Command::Fit {
            x,
            y,
            mask,
            b,
            family,
            estimator,
            config,
            out,
        } => commands::fit(&commands::FitArgs {
            x,
            y,
            mask,
            b,
            family: family.into(),
            estimator,
            config,
            out,
        }),
        Command::Simulate { config, seed, plot, out } => commands::simulate(&config, seed, plot, &out),
        Command::Diagnose { x, b, family, q, out } => commands::diagnose(&x, &b, family.into(), q, &out),
    };
    match result {
        Ok(commands::Status::Converged) => ExitCode::SUCCESS,
        Ok(commands::Status::NotConverged) => {
            log::warn!("the estimator did not converge; results were written anyway");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
