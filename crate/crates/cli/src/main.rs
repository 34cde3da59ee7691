use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use rlass0::analysis::{check_identifiability, AnalysisBudget, IdentifiabilityMethod};
use rlass0::calibration::{qut_threshold, QutSpec};
use rlass0::design::standardize_columns;
use rlass0::estimators::{Pipeline, RlzConfig, Tau};
use rlass0::experiments::{run_experiment, write_metrics_csv, write_raw_csv, SimulationSpec};
use rlass0::io::{read_design_csv, read_signs_csv, read_vector_csv, DesignCsv};
use rlass0::lp::{LpStatus, SolverOptions};
use rlass0::missing::{impute_with, rlz_with_missing, Imputation, MissingOptions};
use rlass0::{DenseMatrix, Error};

#[derive(Parser)]
#[command(name = "rlass0", version, about = "Robust Lasso-Zero and Thresholded Justice Pursuit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImputeArg {
    Mean,
    Zero,
}

impl From<ImputeArg> for Imputation {
    fn from(a: ImputeArg) -> Self {
        match a {
            ImputeArg::Mean => Imputation::Mean,
            ImputeArg::Zero => Imputation::Zero,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    /// Sign-pattern LPs, falling back to the probe past the budget.
    Auto,
    SignPattern,
    Vertex,
    Probe,
}

#[derive(Subcommand)]
enum Command {
    /// Fit Robust Lasso-Zero to a design with optional NA entries.
    Fit {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 20)]
        dictionaries: usize,
        /// A number, or `qut` for the quantile universal threshold.
        #[arg(long, default_value = "qut")]
        tau: String,
        /// Allow corruptions only on rows with a missing entry.
        #[arg(long)]
        restrict_corruption_rows: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        mc: usize,
        #[arg(long, value_enum, default_value_t = ImputeArg::Mean)]
        imputation: ImputeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a simulation grid point and write aggregate metrics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        raw: Option<PathBuf>,
        /// Worker threads; all cores by default.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Calibrate the QUT pivot quantile for a design.
    Qut {
        #[arg(long)]
        x: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 500)]
        mc: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 20)]
        dictionaries: usize,
        #[arg(long)]
        restrict_corruption_rows: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ImputeArg::Mean)]
        imputation: ImputeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check whether a sign pair is identifiable for Justice Pursuit.
    Identify {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        theta: PathBuf,
        #[arg(long)]
        theta_tilde: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct FitOutput {
    columns: Vec<String>,
    beta_hat: Vec<f64>,
    beta_original_scale: Vec<f64>,
    beta_med: Vec<f64>,
    omega_med: Option<Vec<f64>>,
    omega_hat: Option<Vec<f64>>,
    tau_used: f64,
    pivot_quantile: Option<f64>,
    lambda: f64,
    #[serde(rename = "M")]
    m: usize,
    seed: u64,
    corruption_rows: Vec<usize>,
    per_dictionary_status: Vec<LpStatus>,
    qut_failed_draws: Option<usize>,
}

#[derive(Serialize)]
struct QutOutput {
    alpha: f64,
    n_mc: usize,
    lambda: f64,
    #[serde(rename = "M")]
    m: usize,
    seed: u64,
    pivot_quantile: f64,
    failed_draws: usize,
    mc_statistics: Vec<f64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Solver(_) | Error::TooManyFailures { .. } | Error::DegeneratePivot => 3,
        Error::BudgetExceeded { .. } => 4,
        _ => 2,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> rlass0::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    Ok(())
}

fn complete_design(d: &DesignCsv) -> rlass0::Result<DenseMatrix> {
    if d.matrix.missing_count() > 0 {
        return Err(Error::InvalidInput(format!(
            "design has {} missing entries; this command needs a complete matrix",
            d.matrix.missing_count()
        )));
    }
    impute_with(&d.matrix, Imputation::Mean)
}

fn run(cli: Cli) -> rlass0::Result<()> {
    let opts = SolverOptions::default();
    match cli.command {
        Command::Fit {
            x,
            y,
            lambda,
            alpha,
            dictionaries,
            tau,
            restrict_corruption_rows,
            seed,
            mc,
            imputation,
            out,
        } => {
            let design = read_design_csv(&x)?;
            let y = read_vector_csv(&y)?;
            let mut cfg = RlzConfig {
                lambda,
                dictionaries,
                master_seed: seed,
                ..RlzConfig::default()
            };
            let qut = if tau.trim().eq_ignore_ascii_case("qut") {
                Some(QutSpec {
                    alpha,
                    n_mc: mc,
                    lambda,
                    dictionaries,
                    master_seed: seed,
                    pivot: Default::default(),
                    rescale_dictionary: false,
                })
            } else {
                let t: f64 = tau
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("--tau must be a number or `qut`, got {tau:?}")))?;
                cfg.tau = Tau::Fixed(t);
                None
            };
            cfg.validate()?;
            let mopts = MissingOptions {
                imputation: imputation.into(),
                restrict_to_incomplete: restrict_corruption_rows,
            };
            let res = rlz_with_missing(&y, &design.matrix, &cfg, qut.as_ref(), &mopts, &opts)?;
            let beta_original_scale = res.beta_original_scale();
            let f = res.fit;
            info!("tau = {}, {} of {} dictionaries failed", f.tau_used, f.per_dictionary_status.iter().filter(|s| **s != LpStatus::Optimal).count(), dictionaries);
            write_json(
                &out,
                &FitOutput {
                    columns: design.columns,
                    beta_hat: f.beta_hat,
                    beta_original_scale,
                    beta_med: f.beta_med,
                    omega_med: f.omega_med,
                    omega_hat: f.omega_hat,
                    tau_used: f.tau_used,
                    pivot_quantile: f.pivot_quantile,
                    lambda,
                    m: dictionaries,
                    seed,
                    corruption_rows: f.corruption_rows,
                    per_dictionary_status: f.per_dictionary_status,
                    qut_failed_draws: res.qut.map(|q| q.failed_draws),
                },
            )
        }
        Command::Simulate {
            config,
            out,
            raw,
            workers,
        } => {
            let spec = SimulationSpec::from_json(&std::fs::read_to_string(&config)?)?;
            let start = Instant::now();
            let res = run_experiment(&spec, workers, &opts)?;
            write_metrics_csv(&res.metrics, BufWriter::new(File::create(&out)?))?;
            if let Some(raw) = raw {
                write_raw_csv(&res.raw, BufWriter::new(File::create(&raw)?))?;
            }
            eprintln!("simulate: {} replications in {:.2}s", spec.replications, start.elapsed().as_secs_f64());
            for m in &res.metrics {
                eprintln!("  {}: {:.2}s", m.estimator.name(), m.runtime_seconds);
            }
            Ok(())
        }
        Command::Qut {
            x,
            alpha,
            mc,
            lambda,
            dictionaries,
            restrict_corruption_rows,
            seed,
            imputation,
            out,
        } => {
            let design = read_design_csv(&x)?;
            let spec = QutSpec {
                alpha,
                n_mc: mc,
                lambda,
                dictionaries,
                master_seed: seed,
                pivot: Default::default(),
                rescale_dictionary: false,
            };
            spec.validate()?;
            let xs = standardize_columns(&impute_with(&design.matrix, imputation.into())?)?;
            let corr = restrict_corruption_rows.then(|| design.matrix.incomplete_rows().to_vec());
            let res = qut_threshold(&xs, &spec, corr.as_deref(), Pipeline::Robust, &opts)?;
            write_json(
                &out,
                &QutOutput {
                    alpha,
                    n_mc: mc,
                    lambda,
                    m: dictionaries,
                    seed,
                    pivot_quantile: res.pivot_quantile,
                    failed_draws: res.failed_draws,
                    mc_statistics: res.mc_statistics,
                },
            )
        }
        Command::Identify {
            x,
            theta,
            theta_tilde,
            lambda,
            method,
            out,
        } => {
            let xm = complete_design(&read_design_csv(&x)?)?;
            let theta = read_signs_csv(&theta)?;
            let theta_tilde = read_signs_csv(&theta_tilde)?;
            let method = match method {
                MethodArg::Auto => None,
                MethodArg::SignPattern => Some(IdentifiabilityMethod::SignPatternLp),
                MethodArg::Vertex => Some(IdentifiabilityMethod::VertexOracle),
                MethodArg::Probe => Some(IdentifiabilityMethod::PerturbationProbe),
            };
            let verdict =
                check_identifiability(&xm, &theta, &theta_tilde, lambda, method, &AnalysisBudget::default(), &opts)?;
            write_json(&out, &verdict)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
