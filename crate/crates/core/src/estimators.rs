//! Robust Lasso-Zero, Lasso-Zero and Thresholded Justice Pursuit.
//!
//! Both Lasso-Zero variants solve one ℓ₁ program per Gaussian noise
//! dictionary `G⁽ᵏ⁾`, take the componentwise median of the coefficient
//! estimates and hard-threshold the medians. The robust variant adds the
//! `√n I_𝓜 ω` corruption block with weight `λ`; the plain variant omits it.
//!
//! Dictionary `k` is drawn from the stream `(master_seed, [0, k])`, so a fit
//! is a pure function of its inputs and the seed no matter how many threads
//! solve the dictionaries.

use log::warn;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{pivot_scale, qut_threshold, PivotRule, QutSpec};
use crate::design::gaussian_matrix;
use crate::error::{Error, Result};
use crate::lp::jp::audit;
use crate::lp::problem::corruption_block_for;
use crate::lp::{solve_jp, solve_l1, L1Block, LpStatus, SolverOptions, VarRole};
use crate::matrix::Matrix;
use crate::rng::RngStream;
use crate::scalar::{l2_norm, max_abs, Scalar};
use crate::signs::{sign, SignVector};

/// First path component of dictionary streams.
pub const DICTIONARY_STREAM: u64 = 0;

/// `η_τ(x) = x · 1{|x| > τ}`, componentwise.
pub fn hard_threshold<T: Scalar>(v: &[T], tau: T) -> Vec<T> {
    v.iter()
        .map(|x| if x.abs() > tau { *x } else { T::zero() })
        .collect()
}

/// Componentwise median; for an even count the midpoint of the two central
/// order statistics.
pub fn median_aggregate<T: Scalar>(vectors: &[Vec<T>]) -> Result<Vec<T>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidInput("median of an empty list".into()))?;
    let len = first.len();
    if vectors.iter().any(|v| v.len() != len) {
        return Err(Error::Dimension("vectors to aggregate differ in length".into()));
    }
    let mut column = Vec::with_capacity(vectors.len());
    Ok((0..len)
        .map(|j| {
            column.clear();
            column.extend(vectors.iter().map(|v| v[j]));
            median_in_place(&mut column)
        })
        .collect())
}

pub(crate) fn median_in_place<T: Scalar>(values: &mut [T]) -> T {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        (values[m / 2 - 1] + values[m / 2]) / T::of(2.0)
    }
}

/// Which ℓ₁ program each dictionary solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// `[X | √n I_𝓜 | G]` with weights `(1, λ, 1)`.
    Robust,
    /// `[X | G]`, plain Basis Pursuit.
    Plain,
}

/// How the threshold `τ` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tau<T> {
    Fixed(T),
    /// Calibrate by QUT on the same design, dictionaries and corruption set.
    Qut {
        alpha: f64,
        n_mc: usize,
        pivot: PivotRule,
    },
    /// A previously calibrated pivot quantile; `τ = quantile × pivot scale of the fit`.
    Pivotal { pivot_quantile: T, pivot: PivotRule },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlzConfig<T> {
    pub lambda: T,
    pub tau: Tau<T>,
    pub dictionaries: usize,
    pub master_seed: u64,
    /// Rows allowed to carry a corruption; `None` means every row.
    pub corruption_cols: Option<Vec<usize>>,
    /// Separate threshold for the corruption medians; defaults to `τ`.
    pub tau_omega: Option<T>,
    /// Rescale every dictionary column to norm `√n` instead of keeping raw N(0,1) entries.
    pub rescale_dictionary: bool,
}

impl<T: Scalar> Default for RlzConfig<T> {
    fn default() -> Self {
        Self {
            lambda: T::one(),
            tau: Tau::Qut {
                alpha: 0.05,
                n_mc: 500,
                pivot: PivotRule::default(),
            },
            dictionaries: 20,
            master_seed: 0,
            corruption_cols: None,
            tau_omega: None,
            rescale_dictionary: false,
        }
    }
}

impl<T: Scalar> RlzConfig<T> {
    pub fn with_tau(mut self, tau: T) -> Self {
        self.tau = Tau::Fixed(tau);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dictionaries == 0 {
            return Err(Error::InvalidInput("need at least one dictionary".into()));
        }
        if !(self.lambda > T::zero()) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        let bad_tau = |t: T| !(t >= T::zero()) || !t.is_finite();
        match &self.tau {
            Tau::Fixed(t) if bad_tau(*t) => {
                return Err(Error::InvalidInput(format!("tau must be >= 0, got {t}")))
            }
            Tau::Pivotal { pivot_quantile, .. } if bad_tau(*pivot_quantile) => {
                return Err(Error::InvalidInput("pivot quantile must be >= 0".into()))
            }
            Tau::Qut { alpha, n_mc, .. } => {
                QutSpec::new(*alpha, *n_mc, self.lambda.as_f64(), self.dictionaries, self.master_seed)?;
            }
            _ => {}
        }
        if let Some(t) = self.tau_omega {
            if bad_tau(t) {
                return Err(Error::InvalidInput("tau_omega must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Per-dictionary solutions aggregated by medians, before thresholding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianFit<T> {
    pub beta_med: Vec<T>,
    /// Length `n`, original row indexing; `None` for the plain pipeline.
    pub omega_med: Option<Vec<T>>,
    /// Noise coefficients of each dictionary; `None` where the solve failed.
    pub gamma_all: Vec<Option<Vec<T>>>,
    pub per_dictionary_status: Vec<LpStatus>,
    pub corruption_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlzFit<T> {
    pub beta_med: Vec<T>,
    pub omega_med: Option<Vec<T>>,
    pub gamma_all: Vec<Option<Vec<T>>>,
    pub beta_hat: Vec<T>,
    pub omega_hat: Option<Vec<T>>,
    pub tau_used: T,
    pub pivot_quantile: Option<T>,
    pub per_dictionary_status: Vec<LpStatus>,
    pub corruption_rows: Vec<usize>,
}

impl<T: Scalar> MedianFit<T> {
    /// Applies `η_τ` to the medians (and `η_{τ_ω}` to the corruption medians).
    pub fn threshold(self, tau: T, tau_omega: Option<T>, pivot_quantile: Option<T>) -> RlzFit<T> {
        let beta_hat = hard_threshold(&self.beta_med, tau);
        let omega_hat = self
            .omega_med
            .as_ref()
            .map(|o| hard_threshold(o, tau_omega.unwrap_or(tau)));
        RlzFit {
            beta_med: self.beta_med,
            omega_med: self.omega_med,
            gamma_all: self.gamma_all,
            beta_hat,
            omega_hat,
            tau_used: tau,
            pivot_quantile,
            per_dictionary_status: self.per_dictionary_status,
            corruption_rows: self.corruption_rows,
        }
    }

    pub fn failures(&self) -> usize {
        self.per_dictionary_status
            .iter()
            .filter(|s| **s != LpStatus::Optimal)
            .count()
    }
}

/// The `M` standard-normal `n × n` dictionaries of a fit.
pub fn noise_dictionaries<T: Scalar>(n: usize, count: usize, master_seed: u64, rescale: bool) -> Vec<Matrix<T>>
where
    StandardNormal: Distribution<T>,
{
    (0..count)
        .map(|k| {
            let mut rng = RngStream::with_path(master_seed, &[DICTIONARY_STREAM, k as u64]).rng();
            let mut g: Matrix<T> = gaussian_matrix(n, n, &mut rng);
            if rescale {
                let target = T::of(n as f64).sqrt();
                for j in 0..n {
                    let col = g.column(j);
                    let norm = l2_norm(&col);
                    if norm > T::zero() {
                        let scaled: Vec<T> = col.iter().map(|v| *v * target / norm).collect();
                        g.set_column(j, &scaled);
                    }
                }
            }
            g
        })
        .collect()
}

/// Solves one program per dictionary and aggregates by medians.
///
/// Failed solves are dropped from the medians; more than `M/2` failures is
/// an error.
pub fn fit_medians<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    lambda: T,
    corruption_cols: Option<&[usize]>,
    dictionaries: &[Matrix<T>],
    pipeline: Pipeline,
    opts: &SolverOptions,
) -> Result<MedianFit<T>> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "X has {n} rows but y has {} entries",
            y.len()
        )));
    }
    if dictionaries.is_empty() {
        return Err(Error::InvalidInput("need at least one dictionary".into()));
    }
    if dictionaries.iter().any(|g| g.shape() != (n, n)) {
        return Err(Error::Dimension(format!("dictionaries must be {n}x{n}")));
    }
    let (omega_block, rows) = match pipeline {
        Pipeline::Robust => corruption_block_for(n, corruption_cols)?,
        Pipeline::Plain => (Matrix::zeros(n, 0), Vec::new()),
    };
    let solves: Vec<Result<(LpStatus, Vec<Vec<T>>)>> = dictionaries
        .par_iter()
        .map(|g| {
            let mut blocks = vec![L1Block {
                role: VarRole::Beta,
                matrix: x,
                weight: T::one(),
            }];
            if omega_block.cols() > 0 {
                blocks.push(L1Block {
                    role: VarRole::Omega,
                    matrix: &omega_block,
                    weight: lambda,
                });
            }
            blocks.push(L1Block {
                role: VarRole::Gamma,
                matrix: g,
                weight: T::one(),
            });
            let (parts, sol) = solve_l1(&blocks, y, opts)?;
            let (_, _, status) = audit(&blocks, &parts, y, sol.status, opts);
            Ok((status, parts))
        })
        .collect();

    let mut statuses = Vec::with_capacity(solves.len());
    let mut betas = Vec::new();
    let mut omegas = Vec::new();
    let mut gamma_all = Vec::with_capacity(solves.len());
    for s in solves {
        let (status, mut parts) = s?;
        statuses.push(status);
        if status != LpStatus::Optimal {
            gamma_all.push(None);
            continue;
        }
        let gamma = parts.pop().expect("gamma block");
        let omega = if parts.len() == 2 { parts.pop() } else { None };
        betas.push(parts.pop().expect("beta block"));
        if pipeline == Pipeline::Robust {
            let mut full = vec![T::zero(); n];
            if let Some(o) = omega {
                for (v, &i) in o.iter().zip(&rows) {
                    full[i] = *v;
                }
            }
            omegas.push(full);
        }
        gamma_all.push(Some(gamma));
    }
    let failed = statuses.len() - betas.len();
    if 2 * failed > statuses.len() || betas.is_empty() {
        return Err(Error::TooManyFailures {
            failed,
            total: statuses.len(),
        });
    }
    if failed > 0 {
        warn!("{failed} of {} dictionary solves failed and were dropped", statuses.len());
    }
    Ok(MedianFit {
        beta_med: median_aggregate(&betas)?,
        omega_med: match pipeline {
            Pipeline::Robust => Some(median_aggregate(&omegas)?),
            Pipeline::Plain => None,
        },
        gamma_all,
        per_dictionary_status: statuses,
        corruption_rows: rows,
    })
}

fn resolve_tau<T: Scalar>(
    x: &Matrix<T>,
    medians: &MedianFit<T>,
    cfg: &RlzConfig<T>,
    pipeline: Pipeline,
    opts: &SolverOptions,
) -> Result<(T, Option<T>)>
where
    StandardNormal: Distribution<T>,
{
    let (quantile, rule) = match &cfg.tau {
        Tau::Fixed(t) => return Ok((*t, None)),
        Tau::Pivotal {
            pivot_quantile,
            pivot,
        } => (*pivot_quantile, *pivot),
        Tau::Qut { alpha, n_mc, pivot } => {
            let spec = QutSpec {
                pivot: *pivot,
                rescale_dictionary: cfg.rescale_dictionary,
                ..QutSpec::new(*alpha, *n_mc, cfg.lambda.as_f64(), cfg.dictionaries, cfg.master_seed)?
            };
            let res = qut_threshold(x, &spec, cfg.corruption_cols.as_deref(), pipeline, opts)?;
            (T::of(res.pivot_quantile), *pivot)
        }
    };
    match pivot_scale(&medians.gamma_all, rule) {
        Ok(scale) => Ok((quantile * scale, Some(quantile))),
        // y fitted without noise coefficients: nothing to threshold against
        Err(Error::DegeneratePivot) if max_abs(&medians.beta_med) == T::zero() => {
            Ok((T::zero(), Some(quantile)))
        }
        Err(e) => Err(e),
    }
}

fn run<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    cfg: &RlzConfig<T>,
    pipeline: Pipeline,
    opts: &SolverOptions,
) -> Result<RlzFit<T>>
where
    StandardNormal: Distribution<T>,
{
    cfg.validate()?;
    let dicts = noise_dictionaries(x.rows(), cfg.dictionaries, cfg.master_seed, cfg.rescale_dictionary);
    let medians = fit_medians(
        x,
        y,
        cfg.lambda,
        cfg.corruption_cols.as_deref(),
        &dicts,
        pipeline,
        opts,
    )?;
    let (tau, quantile) = resolve_tau(x, &medians, cfg, pipeline, opts)?;
    Ok(medians.threshold(tau, cfg.tau_omega, quantile))
}

/// Robust Lasso-Zero: noise-dictionary Justice Pursuit, medians, hard threshold.
pub fn robust_lasso_zero<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    cfg: &RlzConfig<T>,
    opts: &SolverOptions,
) -> Result<RlzFit<T>>
where
    StandardNormal: Distribution<T>,
{
    run(x, y, cfg, Pipeline::Robust, opts)
}

/// Lasso-Zero: Basis Pursuit on `[X | G⁽ᵏ⁾]`, medians, hard threshold.
/// `cfg.corruption_cols` and `cfg.tau_omega` are ignored.
pub fn lasso_zero<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    cfg: &RlzConfig<T>,
    opts: &SolverOptions,
) -> Result<RlzFit<T>>
where
    StandardNormal: Distribution<T>,
{
    run(x, y, cfg, Pipeline::Plain, opts)
}

/// Thresholded Justice Pursuit. Returns `(η_τ(β̂), η_τ(ω̂))` with `ω̂` in
/// original row indexing.
pub fn tjp<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    lambda: T,
    tau: T,
    corruption_cols: Option<&[usize]>,
    opts: &SolverOptions,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(tau >= T::zero()) {
        return Err(Error::InvalidInput(format!("tau must be >= 0, got {tau}")));
    }
    let sol = solve_jp(x, y, lambda, corruption_cols, opts)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(sol.status));
    }
    let omega = sol.omega_full(x.rows());
    Ok((hard_threshold(&sol.beta, tau), hard_threshold(&omega, tau)))
}

/// Smallest `τ` for which `η_τ` reproduces both sign patterns, if any.
///
/// Only the values `0` and `|v|` for entries `v` of `beta`/`omega` need to
/// be tried: the thresholded signs are constant between consecutive ones.
pub fn sign_recovery_threshold<T: Scalar>(
    beta: &[T],
    omega: &[T],
    theta: &SignVector,
    theta_tilde: &SignVector,
) -> Option<T> {
    let mut candidates: Vec<T> = std::iter::once(T::zero())
        .chain(beta.iter().chain(omega).map(|v| v.abs()))
        .collect();
    candidates.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite"));
    candidates.dedup();
    let matches = |v: &[T], s: &SignVector, tau: T| {
        v.len() == s.len()
            && v
                .iter()
                .zip(s.as_slice())
                .all(|(x, t)| sign(if x.abs() > tau { *x } else { T::zero() }) == *t)
    };
    candidates
        .into_iter()
        .find(|&tau| matches(beta, theta, tau) && matches(omega, theta_tilde, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_examples() {
        assert_eq!(hard_threshold(&[2.0, -0.5, 1.0], 1.0), vec![2.0, 0.0, 0.0]);
        assert_eq!(hard_threshold(&[0.0, -0.1, 3.0], 0.0), vec![0.0, -0.1, 3.0]);
        assert_eq!(hard_threshold(&[0.0; 3], 0.7), vec![0.0; 3]);
    }

    #[test]
    fn median_examples() {
        let m = median_aggregate(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![9.0, 1.0]]).unwrap();
        assert_eq!(m, vec![2.0, 0.0]);
        assert_eq!(median_aggregate(&[vec![4.0, -1.0]]).unwrap(), vec![4.0, -1.0]);
        assert_eq!(median_aggregate(&[vec![1.0], vec![4.0]]).unwrap(), vec![2.5]);
        assert!(median_aggregate::<f64>(&[]).is_err());
        assert!(median_aggregate(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn median_resists_minority_blowup() {
        let clean = [vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]];
        let mut dirty = clean.to_vec();
        dirty[0][0] = 1e300;
        dirty[3][0] = 1e300;
        let m = median_aggregate(&dirty).unwrap()[0];
        assert!((2.0..=5.0).contains(&m));
    }

    #[test]
    fn scalar_tjp() {
        let x = Matrix::new(1, 1, vec![1.0]).unwrap();
        let (b, o) = tjp(&x, &[3.0], 2.0, 1.0, None, &SolverOptions::default()).unwrap();
        assert_eq!(b, vec![3.0]);
        assert_eq!(o, vec![0.0]);
        let (b0, o0) = tjp(&x, &[0.0], 2.0, 0.0, None, &SolverOptions::default()).unwrap();
        assert_eq!((b0, o0), (vec![0.0], vec![0.0]));
    }

    #[test]
    fn tau_sweep_finds_gap() {
        let theta = SignVector::new(vec![1, 0, -1]).unwrap();
        let tt = SignVector::new(vec![0, 1]).unwrap();
        let tau = sign_recovery_threshold(&[5.0, 0.3, -4.0], &[0.1, 6.0], &theta, &tt).unwrap();
        assert_eq!(tau, 0.3);
        // the noise entry exceeds a true signal: no threshold separates them
        assert!(sign_recovery_threshold(&[5.0, 4.5, -4.0], &[0.1, 6.0], &theta, &tt).is_none());
    }

    fn toy_problem() -> (Matrix<f64>, Vec<f64>) {
        let mut rng = RngStream::new(21).rng();
        let x: Matrix<f64> = gaussian_matrix(12, 20, &mut rng);
        let mut beta = vec![0.0; 20];
        beta[3] = 4.0;
        beta[11] = -4.0;
        let mut y = x.mul_vec(&beta);
        y[5] += 10.0;
        let noise: Vec<f64> = crate::design::gaussian_vector(12, &mut rng);
        for (yi, e) in y.iter_mut().zip(noise) {
            *yi += 0.1 * e;
        }
        (x, y)
    }

    #[test]
    fn zero_response_gives_zero_fit() {
        let (x, _) = toy_problem();
        let opts = SolverOptions::default();
        let cfg = RlzConfig {
            dictionaries: 4,
            ..RlzConfig::default()
        }
        .with_tau(0.0);
        let fit = robust_lasso_zero(&x, &[0.0; 12], &cfg, &opts).unwrap();
        assert!(fit.beta_hat.iter().all(|v| *v == 0.0));
        let plain = lasso_zero(&x, &[0.0; 12], &cfg, &opts).unwrap();
        assert!(plain.beta_hat.iter().all(|v| *v == 0.0));
        assert!(plain.omega_med.is_none());
    }

    #[test]
    fn fit_is_reproducible_and_thresholded() {
        let (x, y) = toy_problem();
        let cfg = RlzConfig {
            dictionaries: 5,
            master_seed: 9,
            ..RlzConfig::default()
        }
        .with_tau(0.5);
        let opts = SolverOptions::default();
        let a = robust_lasso_zero(&x, &y, &cfg, &opts).unwrap();
        let b = robust_lasso_zero(&x, &y, &cfg, &opts).unwrap();
        assert_eq!(a, b);
        for (h, m) in a.beta_hat.iter().zip(&a.beta_med) {
            assert_eq!(*h, if m.abs() > 0.5 { *m } else { 0.0 });
        }
        assert_eq!(a.omega_med.as_ref().unwrap().len(), 12);
        assert_eq!(a.gamma_all.len(), 5);
    }

    #[test]
    fn plain_pipeline_equals_empty_corruption_set() {
        let (x, y) = toy_problem();
        let opts = SolverOptions::default();
        let cfg = RlzConfig {
            dictionaries: 3,
            corruption_cols: Some(vec![]),
            ..RlzConfig::default()
        }
        .with_tau(0.2);
        let robust = robust_lasso_zero(&x, &y, &cfg, &opts).unwrap();
        let plain = lasso_zero(&x, &y, &cfg, &opts).unwrap();
        assert_eq!(robust.beta_med, plain.beta_med);
        assert_eq!(robust.beta_hat, plain.beta_hat);
        assert_eq!(robust.gamma_all, plain.gamma_all);
    }

    #[test]
    fn rejects_invalid_config() {
        let (x, y) = toy_problem();
        let opts = SolverOptions::default();
        let zero_m = RlzConfig::<f64> {
            dictionaries: 0,
            ..RlzConfig::default()
        };
        assert!(robust_lasso_zero(&x, &y, &zero_m, &opts).is_err());
        let neg = RlzConfig::<f64>::default().with_tau(-1.0);
        assert!(robust_lasso_zero(&x, &y, &neg, &opts).is_err());
    }

    #[test]
    fn dictionary_rescaling() {
        let g = noise_dictionaries::<f64>(6, 2, 1, true);
        for j in 0..6 {
            assert!((l2_norm(&g[1].column(j)) - 6f64.sqrt()).abs() < 1e-12);
        }
        let raw = noise_dictionaries::<f64>(6, 2, 1, false);
        assert_ne!(raw[0], raw[1]);
    }

    proptest! {
        #[test]
        fn threshold_support_is_monotone(v in proptest::collection::vec(-5.0f64..5.0, 1..20),
                                         t1 in 0.0f64..5.0, dt in 0.0f64..5.0) {
            let lo = hard_threshold(&v, t1);
            let hi = hard_threshold(&v, t1 + dt);
            for (a, b) in lo.iter().zip(&hi) {
                prop_assert!(*b == 0.0 || *a != 0.0);
            }
        }

        #[test]
        fn median_is_permutation_invariant(vals in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 1..9),
                                           seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            let mut shuffled = vals.clone();
            shuffled.shuffle(&mut RngStream::new(seed).rng());
            prop_assert_eq!(median_aggregate(&vals).unwrap(), median_aggregate(&shuffled).unwrap());
        }
    }
}
