//! Quantile Universal Threshold (QUT) calibration of `τ`.
//!
//! Under the null model `β⁰ = 0` the response is pure noise, `y = ε`. The
//! null statistic `‖β̂^med(ε)‖∞` is pivotized by a scale `s(ε)` computed from
//! the noise-dictionary coefficients, which makes its distribution free of
//! `σ`. The upper `α`-quantile of the pivotized statistic, times the scale of
//! the actual data fit, is the threshold.
//!
//! Draw `j` uses noise from the stream `(master_seed, [1, j])` and the same
//! dictionaries as the fit it calibrates.

use log::warn;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::gaussian_vector;
use crate::error::{Error, Result};
use crate::estimators::{fit_medians, median_in_place, noise_dictionaries, MedianFit, Pipeline};
use crate::lp::SolverOptions;
use crate::matrix::Matrix;
use crate::rng::RngStream;
use crate::scalar::{max_abs, Scalar};

/// First path component of QUT noise streams.
pub const NOISE_STREAM: u64 = 1;

/// Largest share of Monte Carlo draws that may fail before calibration aborts.
pub const MAX_FAILED_DRAW_SHARE: f64 = 0.10;

/// How the scale `s` is computed from the noise coefficients `γ̂⁽ᵏ⁾`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    /// Median of `|γ̂⁽ᵏ⁾ᵢ|` pooled over `k` and `i`, zeros included.
    PooledMedian,
    /// Pooled median over the nonzero `|γ̂⁽ᵏ⁾ᵢ|` only.
    #[default]
    NonzeroPooledMedian,
    /// Median over `k` of the median absolute deviation of `γ̂⁽ᵏ⁾`.
    DictionaryMad,
}

/// The pivot scale `s` of a fit. Failed dictionaries (`None`) are skipped.
pub fn pivot_scale<T: Scalar>(gamma_all: &[Option<Vec<T>>], rule: PivotRule) -> Result<T> {
    let gammas: Vec<&Vec<T>> = gamma_all.iter().flatten().collect();
    if gammas.is_empty() {
        return Err(Error::InvalidInput("no successful dictionary".into()));
    }
    let scale = match rule {
        PivotRule::PooledMedian => {
            let mut all: Vec<T> = gammas.iter().flat_map(|g| g.iter().map(|v| v.abs())).collect();
            median_in_place(&mut all)
        }
        PivotRule::NonzeroPooledMedian => {
            let top = gammas.iter().fold(T::zero(), |m, g| m.max(max_abs(g)));
            let cut = top * T::of(T::DEFAULT_TOL);
            let mut nz: Vec<T> = gammas
                .iter()
                .flat_map(|g| g.iter().map(|v| v.abs()))
                .filter(|v| *v > cut)
                .collect();
            if nz.is_empty() {
                return Err(Error::DegeneratePivot);
            }
            median_in_place(&mut nz)
        }
        PivotRule::DictionaryMad => {
            let mut mads: Vec<T> = gammas
                .iter()
                .map(|g| {
                    let mut v = g.to_vec();
                    let center = median_in_place(&mut v);
                    let mut dev: Vec<T> = g.iter().map(|x| (*x - center).abs()).collect();
                    median_in_place(&mut dev)
                })
                .collect();
            median_in_place(&mut mads)
        }
    };
    if scale > T::zero() {
        Ok(scale)
    } else {
        Err(Error::DegeneratePivot)
    }
}

/// Empirical quantile at level `q ∈ [0, 1]` by linear interpolation between
/// order statistics (Hyndman–Fan type 7).
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!("quantile level {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Upper `α`-quantile: the empirical quantile at level `1 − α`.
pub fn upper_quantile(values: &[f64], alpha: f64) -> Result<f64> {
    empirical_quantile(values, 1.0 - alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QutSpec {
    pub alpha: f64,
    pub n_mc: usize,
    pub lambda: f64,
    pub dictionaries: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub pivot: PivotRule,
    #[serde(default)]
    pub rescale_dictionary: bool,
}

impl QutSpec {
    pub fn new(alpha: f64, n_mc: usize, lambda: f64, dictionaries: usize, master_seed: u64) -> Result<Self> {
        let spec = Self {
            alpha,
            n_mc,
            lambda,
            dictionaries,
            master_seed,
            pivot: PivotRule::default(),
            rescale_dictionary: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.n_mc < 50 {
            return Err(Error::InvalidInput(format!(
                "n_mc must be at least 50, got {}",
                self.n_mc
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput("lambda must be positive".into()));
        }
        if self.dictionaries == 0 {
            return Err(Error::InvalidInput("need at least one dictionary".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QutResult {
    pub alpha: f64,
    pub pivot: PivotRule,
    pub pivot_quantile: f64,
    /// Pivotized null statistics of the successful draws, in draw order.
    pub mc_statistics: Vec<f64>,
    pub failed_draws: usize,
}

impl QutResult {
    /// `τ = pivot_quantile × s(y)` for a fit of the actual data.
    pub fn tau_for<T: Scalar>(&self, fit: &MedianFit<T>) -> Result<T> {
        let s = pivot_scale(&fit.gamma_all, self.pivot)?;
        Ok(T::of(self.pivot_quantile) * s)
    }
}

/// Pivotized null statistic `‖β̂^med‖∞ / s` of one fit.
pub fn pivot_statistic<T: Scalar>(fit: &MedianFit<T>, rule: PivotRule) -> Result<T> {
    Ok(max_abs(&fit.beta_med) / pivot_scale(&fit.gamma_all, rule)?)
}

/// Monte Carlo QUT calibration on the design `x`, which must already be the
/// matrix the fit will use.
pub fn qut_threshold<T: Scalar>(
    x: &Matrix<T>,
    spec: &QutSpec,
    corruption_cols: Option<&[usize]>,
    pipeline: Pipeline,
    opts: &SolverOptions,
) -> Result<QutResult>
where
    StandardNormal: Distribution<T>,
{
    spec.validate()?;
    let n = x.rows();
    let dicts = noise_dictionaries::<T>(n, spec.dictionaries, spec.master_seed, spec.rescale_dictionary);
    let lambda = T::of(spec.lambda);
    let draws: Vec<Result<T>> = (0..spec.n_mc)
        .into_par_iter()
        .map(|j| {
            let mut rng = RngStream::with_path(spec.master_seed, &[NOISE_STREAM, j as u64]).rng();
            let eps: Vec<T> = gaussian_vector(n, &mut rng);
            // each draw already runs its dictionaries in parallel
            let fit = fit_medians(x, &eps, lambda, corruption_cols, &dicts, pipeline, opts)?;
            pivot_statistic(&fit, spec.pivot)
        })
        .collect();
    let mut stats = Vec::with_capacity(spec.n_mc);
    let mut failed = 0;
    for d in draws {
        match d {
            Ok(t) => stats.push(t.as_f64()),
            Err(e @ (Error::TooManyFailures { .. } | Error::DegeneratePivot | Error::Solver(_))) => {
                warn!("QUT draw dropped: {e}");
                failed += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if failed as f64 > MAX_FAILED_DRAW_SHARE * spec.n_mc as f64 {
        return Err(Error::TooManyFailures {
            failed,
            total: spec.n_mc,
        });
    }
    Ok(QutResult {
        alpha: spec.alpha,
        pivot: spec.pivot,
        pivot_quantile: upper_quantile(&stats, spec.alpha)?,
        mc_statistics: stats,
        failed_draws: failed,
    })
}
