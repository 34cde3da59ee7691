//! Replication harness for the missing-data simulation protocol.
//!
//! Replication `r` draws its design, `β⁰`, corruptions and noise from the
//! stream `(seed, [r, 0])`, its missingness pattern from `(seed, [r, 1])`, and
//! seeds its estimators with `(seed, [r, 2])`. Results are collected in
//! replication order, so output does not depend on the number of workers.

use std::io::Write;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{qut_threshold, PivotRule, QutSpec};
use crate::design::{draw_sparse_signed, gaussian_vector, sample_design, standardize_columns, toeplitz_sigma, SupportLayout};
use crate::error::{Error, Result};
use crate::estimators::{fit_medians, hard_threshold, noise_dictionaries, Pipeline};
use crate::lp::{solve_jp, SolverOptions};
use crate::metrics::{has_tie_at_cut, oracle_s_threshold, psr_indicator, s_fdp, s_tpp};
use crate::missing::{generate_missingness, impute_with, Imputation, MissingnessSpec};
use crate::rng::RngStream;
use crate::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorTag {
    Rlass0,
    Lass0,
    Tjp,
}

impl EstimatorTag {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rlass0 => "rlass0",
            Self::Lass0 => "lass0",
            Self::Tjp => "tjp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    /// `τ` keeps exactly `s` coefficients.
    OracleS,
    /// `τ` from QUT.
    Automatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Mechanism {
    None,
    Mcar,
    Mnar { a: f64 },
}

impl Mechanism {
    fn strength(self) -> Option<f64> {
        match self {
            Self::None => None,
            Self::Mcar => Some(0.0),
            Self::Mnar { a } => Some(a),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMagnitude {
    /// Nonzero entries drawn uniformly from `{±1}` (times `beta_scale`).
    #[default]
    PlusMinusOne,
}

fn default_scale() -> f64 {
    1.0
}
fn default_m() -> usize {
    20
}
fn default_lambda() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.05
}
fn default_n_mc() -> usize {
    500
}
fn default_true() -> bool {
    true
}

/// One simulation setting. Field names match the JSON config; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub s: usize,
    pub sigma_noise: f64,
    #[serde(default)]
    pub beta_magnitude: BetaMagnitude,
    #[serde(default = "default_scale")]
    pub beta_scale: f64,
    #[serde(default)]
    pub support_layout: SupportLayout,
    /// Number of corrupted responses `k`; entries of `ω⁰` are `±corruption_magnitude`.
    #[serde(default)]
    pub corruptions: usize,
    #[serde(default = "default_scale")]
    pub corruption_magnitude: f64,
    pub mechanism: Mechanism,
    #[serde(default)]
    pub pi: f64,
    pub replications: usize,
    pub estimators: Vec<EstimatorTag>,
    pub tuning: Tuning,
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default)]
    pub imputation: Imputation,
    /// Corruption columns of the Lasso-Zero fits restricted to incomplete
    /// rows (all rows when there is no missingness mechanism). TJP always
    /// uses every row.
    #[serde(default = "default_true")]
    pub restrict_corruption_rows: bool,
    #[serde(default)]
    pub pivot: PivotRule,
    pub master_seed: u64,
}

impl SimulationSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be positive".into());
        }
        if self.s > self.p {
            return bad(format!("s = {} exceeds p = {}", self.s, self.p));
        }
        if self.corruptions > self.n {
            return bad(format!("corruptions = {} exceeds n = {}", self.corruptions, self.n));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if !(self.sigma_noise >= 0.0) || !(self.beta_scale > 0.0) || !(self.corruption_magnitude >= 0.0) {
            return bad("sigma_noise, beta_scale and corruption_magnitude must be nonnegative (beta_scale positive)".into());
        }
        match self.mechanism {
            Mechanism::None => {}
            Mechanism::Mnar { a } if !(a >= 0.0) => return bad(format!("MNAR strength must be >= 0, got {a}")),
            _ if !(self.pi > 0.0 && self.pi < 1.0) => return bad(format!("pi must lie in (0, 1), got {}", self.pi)),
            _ => {}
        }
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimator requested".into());
        }
        if self.m == 0 {
            return bad("M must be >= 1".into());
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive".into());
        }
        match self.tuning {
            Tuning::OracleS if self.s == 0 => return bad("oracle-s tuning needs s >= 1".into()),
            Tuning::Automatic => {
                if self.estimators.contains(&EstimatorTag::Tjp) {
                    return bad("tjp has no automatic tuning (QUT needs noise dictionaries)".into());
                }
                QutSpec::new(self.alpha, self.n_mc, self.lambda, self.m, 0)?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// Outcome of one estimator on one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub estimator: EstimatorTag,
    pub sign_recovered: u8,
    /// `None` when `β⁰ = 0`.
    pub s_tpp: Option<f64>,
    pub s_fdp: f64,
    pub support_size: usize,
    pub tau: f64,
    /// The `s`-th and `(s+1)`-th largest magnitudes tie (oracle-s only).
    pub tie_at_cut: bool,
    pub incomplete_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub estimator: EstimatorTag,
    pub replications: usize,
    pub failed: usize,
    pub psr: f64,
    pub psr_se: f64,
    pub s_tpr: Option<f64>,
    pub s_tpr_se: Option<f64>,
    pub s_fdr: f64,
    pub s_fdr_se: f64,
    /// Wall-clock seconds spent in this estimator, summed over replications.
    /// Not written to the metrics CSV so that the file is reproducible.
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub metrics: Vec<MetricsRecord>,
    pub raw: Vec<ReplicationRecord>,
}

/// Data of one replication.
#[derive(Debug, Clone)]
pub struct ReplicationData {
    pub x_complete: DenseMatrix,
    pub beta0: Vec<f64>,
    pub omega0: Vec<f64>,
    pub y: Vec<f64>,
    /// Imputed and standardized design used by every estimator.
    pub x: DenseMatrix,
    pub incomplete_rows: Vec<usize>,
}

/// Draws replication `r` of `spec`.
pub fn draw_replication(spec: &SimulationSpec, r: usize) -> Result<ReplicationData> {
    let main = RngStream::with_path(spec.master_seed, &[r as u64, 0]);
    let sigma = toeplitz_sigma::<f64>(spec.p, spec.rho)?;
    let x_complete = standardize_columns(&sample_design(spec.n, &sigma, &main.child(0))?)?;
    let mut rng = main.child(1).rng();
    let beta0: Vec<f64> = draw_sparse_signed(spec.p, spec.s, spec.beta_scale, spec.support_layout, &mut rng)?;
    let omega0: Vec<f64> =
        draw_sparse_signed(spec.n, spec.corruptions, spec.corruption_magnitude, SupportLayout::UniformRandom, &mut rng)?;
    let eps: Vec<f64> = gaussian_vector(spec.n, &mut rng);
    let sq = (spec.n as f64).sqrt();
    let y: Vec<f64> = x_complete
        .mul_vec(&beta0)
        .iter()
        .zip(&omega0)
        .zip(&eps)
        .map(|((xb, w), e)| xb + sq * w + spec.sigma_noise * e)
        .collect();
    let (x, incomplete_rows) = match spec.mechanism.strength() {
        None => (x_complete.clone(), Vec::new()),
        Some(a) => {
            let mech = MissingnessSpec::new(a, spec.pi)?;
            let inc = generate_missingness(&x_complete, &mech, &RngStream::with_path(spec.master_seed, &[r as u64, 1]));
            let imputed = impute_with(&inc, spec.imputation)?;
            (standardize_columns(&imputed)?, inc.incomplete_rows().to_vec())
        }
    };
    Ok(ReplicationData {
        x_complete,
        beta0,
        omega0,
        y,
        x,
        incomplete_rows,
    })
}

fn corruption_set(spec: &SimulationSpec, data: &ReplicationData) -> Option<Vec<usize>> {
    (spec.restrict_corruption_rows && spec.mechanism != Mechanism::None).then(|| data.incomplete_rows.clone())
}

/// Thresholded estimate of one estimator and the `τ` it used.
pub fn run_estimator(
    spec: &SimulationSpec,
    data: &ReplicationData,
    estimator: EstimatorTag,
    fit_seed: u64,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, f64, bool)> {
    let corr = corruption_set(spec, data);
    let pipeline = match estimator {
        EstimatorTag::Tjp => {
            // without a noise dictionary a restricted corruption block cannot absorb dense noise
            let sol = solve_jp(&data.x, &data.y, spec.lambda, None, opts)?;
            if !sol.is_optimal() {
                return Err(Error::Solver(sol.status));
            }
            let tau = oracle_s_threshold(&sol.beta, spec.s)?;
            let tie = has_tie_at_cut(&sol.beta, spec.s);
            return Ok((hard_threshold(&sol.beta, tau), tau, tie));
        }
        EstimatorTag::Rlass0 => Pipeline::Robust,
        EstimatorTag::Lass0 => Pipeline::Plain,
    };
    let dicts = noise_dictionaries::<f64>(spec.n, spec.m, fit_seed, false);
    let med = fit_medians(&data.x, &data.y, spec.lambda, corr.as_deref(), &dicts, pipeline, opts)?;
    let (tau, tie) = match spec.tuning {
        Tuning::OracleS => (oracle_s_threshold(&med.beta_med, spec.s)?, has_tie_at_cut(&med.beta_med, spec.s)),
        Tuning::Automatic => {
            let qspec = QutSpec {
                pivot: spec.pivot,
                ..QutSpec::new(spec.alpha, spec.n_mc, spec.lambda, spec.m, fit_seed)?
            };
            let q = qut_threshold(&data.x, &qspec, corr.as_deref(), pipeline, opts)?;
            (q.tau_for(&med)?, false)
        }
    };
    Ok((hard_threshold(&med.beta_med, tau), tau, tie))
}

fn replication(
    spec: &SimulationSpec,
    r: usize,
    opts: &SolverOptions,
) -> Vec<(EstimatorTag, Result<ReplicationRecord>, f64)> {
    let data = match draw_replication(spec, r) {
        Ok(d) => d,
        Err(e) => {
            let msg = e.to_string();
            return spec
                .estimators
                .iter()
                .map(|&est| (est, Err(Error::InvalidInput(msg.clone())), 0.0))
                .collect();
        }
    };
    let fit_seed = RngStream::with_path(spec.master_seed, &[r as u64, 2]).derive_seed();
    spec.estimators
        .iter()
        .map(|&est| {
            let start = Instant::now();
            let rec = run_estimator(spec, &data, est, fit_seed, opts).and_then(|(beta_hat, tau, tie)| {
                let has_signal = data.beta0.iter().any(|v| *v != 0.0);
                Ok(ReplicationRecord {
                    replication: r,
                    estimator: est,
                    sign_recovered: psr_indicator(&beta_hat, &data.beta0)?,
                    s_tpp: if has_signal { Some(s_tpp(&beta_hat, &data.beta0)?) } else { None },
                    s_fdp: s_fdp(&beta_hat, &data.beta0)?,
                    support_size: beta_hat.iter().filter(|v| **v != 0.0).count(),
                    tau,
                    tie_at_cut: tie,
                    incomplete_rows: data.incomplete_rows.len(),
                })
            });
            (est, rec, start.elapsed().as_secs_f64())
        })
        .collect()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Runs every replication of `spec` on `workers` threads (all cores when
/// `None`) and aggregates metrics per estimator.
pub fn run_experiment(spec: &SimulationSpec, workers: Option<usize>, opts: &SolverOptions) -> Result<ExperimentOutput> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let per_rep: Vec<Vec<(EstimatorTag, Result<ReplicationRecord>, f64)>> = pool.install(|| {
        (0..spec.replications)
            .into_par_iter()
            .map(|r| replication(spec, r, opts))
            .collect()
    });

    let mut raw = Vec::new();
    let mut metrics = Vec::new();
    for (slot, &est) in spec.estimators.iter().enumerate() {
        let mut records = Vec::new();
        let mut failed = 0;
        let mut runtime = 0.0;
        for (r, rep) in per_rep.iter().enumerate() {
            let (_, res, secs) = &rep[slot];
            runtime += secs;
            match res {
                Ok(rec) => records.push(rec.clone()),
                Err(e) => {
                    warn!("replication {r}, {}: {e}", est.name());
                    failed += 1;
                }
            }
        }
        if records.is_empty() {
            return Err(Error::TooManyFailures {
                failed,
                total: spec.replications,
            });
        }
        let k = records.len() as f64;
        let psr = records.iter().map(|r| f64::from(r.sign_recovered)).sum::<f64>() / k;
        let tpp: Vec<f64> = records.iter().filter_map(|r| r.s_tpp).collect();
        let (s_tpr, s_tpr_se) = if tpp.is_empty() {
            (None, None)
        } else {
            let (m, se) = mean_and_se(&tpp);
            (Some(m), Some(se))
        };
        let (s_fdr, s_fdr_se) = mean_and_se(&records.iter().map(|r| r.s_fdp).collect::<Vec<_>>());
        info!("{}: {runtime:.2}s over {} replications", est.name(), spec.replications);
        metrics.push(MetricsRecord {
            estimator: est,
            replications: records.len(),
            failed,
            psr,
            psr_se: (psr * (1.0 - psr) / k).sqrt(),
            s_tpr,
            s_tpr_se,
            s_fdr,
            s_fdr_se,
            runtime_seconds: runtime,
        });
        raw.extend(records);
    }
    raw.sort_by_key(|r| (r.replication, r.estimator));
    Ok(ExperimentOutput { metrics, raw })
}

fn opt_field(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Aggregate metrics, one row per estimator. Runtime is left out so that the
/// file is byte-reproducible.
pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["estimator", "replications", "failed", "psr", "psr_se", "s_tpr", "s_tpr_se", "s_fdr", "s_fdr_se"])?;
    for r in records {
        w.write_record([
            r.estimator.name().to_string(),
            r.replications.to_string(),
            r.failed.to_string(),
            r.psr.to_string(),
            r.psr_se.to_string(),
            opt_field(r.s_tpr),
            opt_field(r.s_tpr_se),
            r.s_fdr.to_string(),
            r.s_fdr_se.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_raw_csv<W: Write>(records: &[ReplicationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "replication",
        "estimator",
        "sign_recovered",
        "s_tpp",
        "s_fdp",
        "support_size",
        "tau",
        "tie_at_cut",
        "incomplete_rows",
    ])?;
    for r in records {
        w.write_record([
            r.replication.to_string(),
            r.estimator.name().to_string(),
            r.sign_recovered.to_string(),
            opt_field(r.s_tpp),
            r.s_fdp.to_string(),
            r.support_size.to_string(),
            r.tau.to_string(),
            r.tie_at_cut.to_string(),
            r.incomplete_rows.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
