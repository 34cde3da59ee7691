//! Missing covariates recast as sparse corruption.
//!
//! A row with a missing entry on the support of `β⁰` sees its response
//! shifted by `(X − X̃)β⁰`, where `X̃` is the imputed matrix. Only incomplete
//! rows can be shifted, so after imputation and rescaling the problem is a
//! sparse-corruption regression whose corruption set is the set `𝓜` of
//! incomplete rows.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{qut_threshold, QutResult, QutSpec};
use crate::design::{standardize_with_factors, Standardization};
use crate::error::{Error, Result};
use crate::estimators::{robust_lasso_zero, Pipeline, RlzConfig, RlzFit, Tau};
use crate::lp::SolverOptions;
use crate::rng::RngStream;
use crate::DenseMatrix;

/// `P(missing | x) = 1 / (1 + e^{−a|x| − b})`.
pub fn logistic_missing_prob(x: f64, a: f64, b: f64) -> f64 {
    let t = a * x.abs() + b;
    // split on the sign of t to avoid overflow in exp
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Nodes and weights of the `m`-point Gauss–Legendre rule on `[−1, 1]`.
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

const QUAD_UPPER: f64 = 12.0;
const QUAD_PANELS: usize = 48;
const QUAD_NODES: usize = 16;

/// `E[P(missing | x)]` for `x ~ N(0, 1)`.
///
/// The integrand is even with a kink at 0, so it is integrated as
/// `2 ∫₀^12 φ(x) σ(a x + b) dx` by composite Gauss–Legendre
/// (48 panels × 16 nodes). The neglected tail is below `2·φ(12) / 12 < 1e−32`.
pub fn expected_missing_rate(a: f64, b: f64) -> f64 {
    let rule = gauss_legendre(QUAD_NODES);
    let h = QUAD_UPPER / QUAD_PANELS as f64;
    let norm = 1.0 / (2.0 * PI).sqrt();
    let mut total = 0.0;
    for panel in 0..QUAD_PANELS {
        let mid = (panel as f64 + 0.5) * h;
        for &(t, w) in &rule {
            let x = mid + 0.5 * h * t;
            total += w * 0.5 * h * norm * (-0.5 * x * x).exp() * logistic_missing_prob(x, a, b);
        }
    }
    2.0 * total
}

/// Intercept `b` with `E[P(missing | x)] = π` for `x ~ N(0, 1)`, by bisection
/// on `(−50, 50)`.
pub fn solve_b_for_pi(a: f64, pi: f64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::InvalidInput(format!("pi must lie in (0, 1), got {pi}")));
    }
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::InvalidInput(format!("a must be >= 0, got {a}")));
    }
    let (mut lo, mut hi) = (-50.0_f64, 50.0_f64);
    let f = |b: f64| expected_missing_rate(a, b) - pi;
    assert!(f(lo) < 0.0 && f(hi) > 0.0, "bracket (-50, 50) must contain the root");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub a: f64,
    pub pi: f64,
    pub b: f64,
}

impl MissingnessSpec {
    /// Solves for the intercept matching the target proportion `pi`.
    pub fn new(a: f64, pi: f64) -> Result<Self> {
        let b = solve_b_for_pi(a, pi)?;
        Ok(Self { a, pi, b })
    }

    pub fn prob(&self, x: f64) -> f64 {
        logistic_missing_prob(x, self.a, self.b)
    }
}

/// Design matrix with missing entries.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteMatrix {
    rows: usize,
    cols: usize,
    /// Row-major; `NaN` at missing positions.
    values: Vec<f64>,
    /// Row-major; `true` iff missing.
    mask: Vec<bool>,
    incomplete_rows: Vec<usize>,
}

impl IncompleteMatrix {
    /// Masks the entries of `x` where `mask(i, j)` holds.
    pub fn from_mask(x: &DenseMatrix, mut mask: impl FnMut(usize, usize) -> bool) -> Self {
        let (rows, cols) = x.shape();
        let mut values = x.as_slice().to_vec();
        let mut m = vec![false; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                if mask(i, j) {
                    m[i * cols + j] = true;
                    values[i * cols + j] = f64::NAN;
                }
            }
        }
        Self::assemble(rows, cols, values, m)
    }

    /// Builds from rows of optional entries; `None` is missing.
    pub fn from_options(data: &[Vec<Option<f64>>]) -> Result<Self> {
        let rows = data.len();
        let cols = data.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix must be non-empty".into()));
        }
        if data.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let mut values = Vec::with_capacity(rows * cols);
        let mut mask = Vec::with_capacity(rows * cols);
        for (i, row) in data.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                match v {
                    Some(x) if !x.is_finite() => {
                        return Err(Error::InvalidInput(format!("non-finite entry at ({i}, {j})")))
                    }
                    Some(x) => {
                        values.push(*x);
                        mask.push(false);
                    }
                    None => {
                        values.push(f64::NAN);
                        mask.push(true);
                    }
                }
            }
        }
        Ok(Self::assemble(rows, cols, values, mask))
    }

    fn assemble(rows: usize, cols: usize, values: Vec<f64>, mask: Vec<bool>) -> Self {
        let incomplete_rows = (0..rows)
            .filter(|i| mask[i * cols..(i + 1) * cols].iter().any(|m| *m))
            .collect();
        Self {
            rows,
            cols,
            values,
            mask,
            incomplete_rows,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.cols + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (!self.is_missing(i, j)).then(|| self.values[i * self.cols + j])
    }

    /// Raw row-major values with `NaN` at missing positions.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// The set `𝓜` of rows with at least one missing entry, ascending.
    pub fn incomplete_rows(&self) -> &[usize] {
        &self.incomplete_rows
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn missing_rate(&self) -> f64 {
        self.missing_count() as f64 / self.mask.len() as f64
    }

    pub fn observed_in_column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).filter_map(|i| self.get(i, j)).collect()
    }
}

/// Masks every entry independently with probability `spec.prob(x_ij)`,
/// visiting entries in row-major order.
pub fn generate_missingness(x: &DenseMatrix, spec: &MissingnessSpec, stream: &RngStream) -> IncompleteMatrix {
    let mut rng = stream.rng();
    IncompleteMatrix::from_mask(x, |i, j| rng.random::<f64>() < spec.prob(x[(i, j)]))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    /// Column mean of the observed entries.
    #[default]
    Mean,
    Zero,
}

/// Fills missing entries of column `j` with `fill(j, observed entries of j)`.
pub fn impute_columns(
    inc: &IncompleteMatrix,
    mut fill: impl FnMut(usize, &[f64]) -> Result<f64>,
) -> Result<DenseMatrix> {
    let (n, p) = inc.shape();
    let mut data = inc.values.clone();
    for j in 0..p {
        if (0..n).all(|i| !inc.is_missing(i, j)) {
            continue;
        }
        let value = fill(j, &inc.observed_in_column(j))?;
        for i in 0..n {
            if inc.is_missing(i, j) {
                data[i * p + j] = value;
            }
        }
    }
    DenseMatrix::new(n, p, data)
}

pub fn mean_impute(inc: &IncompleteMatrix) -> Result<DenseMatrix> {
    impute_columns(inc, |j, obs| {
        if obs.is_empty() {
            return Err(Error::EmptyColumn { index: j });
        }
        Ok(obs.iter().sum::<f64>() / obs.len() as f64)
    })
}

pub fn zero_impute(inc: &IncompleteMatrix) -> Result<DenseMatrix> {
    impute_columns(inc, |j, obs| {
        if obs.is_empty() {
            return Err(Error::EmptyColumn { index: j });
        }
        Ok(0.0)
    })
}

pub fn impute_with(inc: &IncompleteMatrix, method: Imputation) -> Result<DenseMatrix> {
    match method {
        Imputation::Mean => mean_impute(inc),
        Imputation::Zero => zero_impute(inc),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingOptions {
    pub imputation: Imputation,
    /// Restrict corruption columns to the incomplete rows; otherwise
    /// `cfg.corruption_cols` is used as given.
    pub restrict_to_incomplete: bool,
}

impl Default for MissingOptions {
    fn default() -> Self {
        Self {
            imputation: Imputation::Mean,
            restrict_to_incomplete: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingFit {
    /// Coefficients refer to the standardized imputed matrix, original column order.
    pub fit: RlzFit<f64>,
    pub standardization: Standardization<f64>,
    pub qut: Option<QutResult>,
}

impl MissingFit {
    /// `β̂` expressed for the raw (unstandardized) columns.
    pub fn beta_original_scale(&self) -> Vec<f64> {
        self.standardization.to_original_scale(&self.fit.beta_hat)
    }
}

/// Impute, standardize (center, column norm `√n`), pick the corruption set,
/// calibrate `τ` if `qut` is given, and fit Robust Lasso-Zero.
pub fn rlz_with_missing(
    y: &[f64],
    inc: &IncompleteMatrix,
    cfg: &RlzConfig<f64>,
    qut: Option<&QutSpec>,
    mopts: &MissingOptions,
    opts: &SolverOptions,
) -> Result<MissingFit> {
    if y.len() != inc.rows() {
        return Err(Error::Dimension(format!(
            "X has {} rows but y has {} entries",
            inc.rows(),
            y.len()
        )));
    }
    let imputed = impute_with(inc, mopts.imputation)?;
    let (x, standardization) = standardize_with_factors(&imputed)?;
    let mut cfg = cfg.clone();
    if mopts.restrict_to_incomplete {
        cfg.corruption_cols = Some(inc.incomplete_rows().to_vec());
    }
    let qut = match qut {
        Some(spec) => {
            let res = qut_threshold(&x, spec, cfg.corruption_cols.as_deref(), Pipeline::Robust, opts)?;
            cfg.tau = Tau::Pivotal {
                pivot_quantile: res.pivot_quantile,
                pivot: res.pivot,
            };
            Some(res)
        }
        None => None,
    };
    let fit = robust_lasso_zero(&x, y, &cfg, opts)?;
    Ok(MissingFit {
        fit,
        standardization,
        qut,
    })
}
