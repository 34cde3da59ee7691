//! Random designs: Toeplitz covariances, correlated Gaussian rows, column
//! standardization and sparse sign-vector draws.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// `Σ_ij = ρ^|i−j|`, unit diagonal.
pub fn toeplitz_sigma<T: Scalar>(p: usize, rho: T) -> Result<Matrix<T>> {
    if p == 0 {
        return Err(Error::InvalidInput("dimension p must be at least 1".into()));
    }
    if !(rho >= T::zero() && rho < T::one()) {
        return Err(Error::InvalidInput(format!(
            "Toeplitz correlation must lie in [0, 1), got {rho}"
        )));
    }
    Ok(Matrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

/// `n` i.i.d. rows from `N(0, sigma)` computed as `L z` with `L` the lower
/// Cholesky factor and `z` standard normal.
pub fn sample_design<T: Scalar>(n: usize, sigma: &Matrix<T>, stream: &RngStream) -> Result<Matrix<T>>
where
    StandardNormal: Distribution<T>,
{
    if n == 0 {
        return Err(Error::InvalidInput("need at least one row".into()));
    }
    let l = sigma.cholesky()?;
    let p = sigma.rows();
    let mut rng = stream.rng();
    let mut out = Matrix::zeros(n, p);
    let mut z = vec![T::zero(); p];
    for i in 0..n {
        for zj in z.iter_mut() {
            *zj = StandardNormal.sample(&mut rng);
        }
        let row = out.row_mut(i);
        for (a, r) in row.iter_mut().enumerate() {
            *r = (0..=a).fold(T::zero(), |acc, b| acc + l[(a, b)] * z[b]);
        }
    }
    Ok(out)
}

/// Standard-normal `n × m` matrix (noise dictionaries, unit-covariance designs).
pub fn gaussian_matrix<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix<T>
where
    StandardNormal: Distribution<T>,
{
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector<T: Scalar, R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<T>
where
    StandardNormal: Distribution<T>,
{
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Per-column centering and scaling applied by [`standardize_columns`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization<T> {
    pub means: Vec<T>,
    /// Population standard deviations; a column is mapped to `(x − mean) / scale`.
    pub scales: Vec<T>,
}

impl<T: Scalar> Standardization<T> {
    /// Coefficients fitted on the standardized matrix, expressed for the raw columns.
    pub fn to_original_scale(&self, beta: &[T]) -> Vec<T> {
        beta.iter().zip(&self.scales).map(|(b, s)| *b / *s).collect()
    }
}

/// Center each column and scale it to Euclidean norm `√n` (population variance 1).
pub fn standardize_columns<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>> {
    standardize_with_factors(x).map(|(m, _)| m)
}

pub fn standardize_with_factors<T: Scalar>(x: &Matrix<T>) -> Result<(Matrix<T>, Standardization<T>)> {
    let (n, p) = x.shape();
    let nt = T::of(n as f64);
    let mut out = x.clone();
    let mut means = Vec::with_capacity(p);
    let mut scales = Vec::with_capacity(p);
    for j in 0..p {
        let col = x.column(j);
        let mean = col.iter().copied().sum::<T>() / nt;
        let var = col.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / nt;
        let sd = var.sqrt();
        let magnitude = col.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
        if !(sd > T::epsilon() * T::of(64.0) * magnitude) {
            return Err(Error::ConstantColumn { index: j });
        }
        for i in 0..n {
            out[(i, j)] = (x[(i, j)] - mean) / sd;
        }
        means.push(mean);
        scales.push(sd);
    }
    Ok((out, Standardization { means, scales }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportLayout {
    #[default]
    UniformRandom,
    /// Support `{0, …, s−1}`.
    Contiguous,
}

/// Vector of length `len` with `s` nonzero entries equal to `±magnitude`,
/// signs drawn uniformly.
pub fn draw_sparse_signed<T: Scalar, R: Rng + ?Sized>(
    len: usize,
    s: usize,
    magnitude: T,
    layout: SupportLayout,
    rng: &mut R,
) -> Result<Vec<T>> {
    if s > len {
        return Err(Error::InvalidInput(format!(
            "support size {s} exceeds length {len}"
        )));
    }
    let mut support: Vec<usize> = match layout {
        SupportLayout::UniformRandom => sample(rng, len, s).into_vec(),
        SupportLayout::Contiguous => (0..s).collect(),
    };
    support.sort_unstable();
    let mut v = vec![T::zero(); len];
    for j in support {
        v[j] = if rng.random::<bool>() { magnitude } else { -magnitude };
    }
    Ok(v)
}
