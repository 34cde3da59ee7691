use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::DenseMatrix;

/// The unspecified numerical constants `C`, `C′`, `C″`; `C ≥ 144²` is required.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c: f64,
    pub c_prime: f64,
    pub c_double_prime: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c: 144.0 * 144.0,
            c_prime: 1.0,
            c_double_prime: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `κ(Σ) = λ_max / λ_min`
    pub kappa: f64,
    /// `n ≥ C κ/λ_min · s log p`
    pub sample_size: BoundCheck,
    /// `n/k ≥ max{1/C′, κ/C″}`; `lhs = ∞` when `k = 0`
    pub corruption_fraction: BoundCheck,
    /// `β⁰_min > 10√2 max{1,λ} σ √(p+n) / (λ_min/4 · (√(p/n) − 1)² + 1)^{1/2}`
    pub beta_min: BoundCheck,
}

fn to_nalgebra(sigma: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(sigma.rows(), sigma.cols(), sigma.as_slice())
}

fn check_spd(sigma: &DenseMatrix) -> Result<()> {
    if !sigma.is_symmetric(1e-12 * (1.0 + sigma.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())))) {
        return Err(Error::InvalidInput("covariance matrix is not symmetric".into()));
    }
    sigma.cholesky().map(|_| ())
}

/// `(λ_min, λ_max)` of a symmetric positive definite matrix by a full
/// symmetric eigendecomposition.
pub fn extreme_eigenvalues(sigma: &DenseMatrix) -> Result<(f64, f64)> {
    check_spd(sigma)?;
    let eig = to_nalgebra(sigma).symmetric_eigenvalues();
    Ok((eig.min(), eig.max()))
}

/// `(λ_min, λ_max)` by power iteration on `Σ` and inverse iteration through
/// a Cholesky factor, stopped when the Rayleigh quotient changes by less than
/// `rel_tol` (relative).
pub fn power_iteration_extremes(sigma: &DenseMatrix, rel_tol: f64, max_iter: usize) -> Result<(f64, f64)> {
    check_spd(sigma)?;
    let p = sigma.rows();
    let l = sigma.cholesky()?;
    let start: Vec<f64> = crate::design::gaussian_vector(p, &mut RngStream::new(0xe16).rng());
    let normalize = |v: &mut Vec<f64>| {
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nrm);
    };
    let rayleigh = |v: &[f64]| v.iter().zip(sigma.mul_vec(v)).map(|(a, b)| a * b).sum::<f64>();

    let iterate = |step: &dyn Fn(&[f64]) -> Vec<f64>| -> Result<f64> {
        let mut v = start.clone();
        normalize(&mut v);
        let mut prev = rayleigh(&v);
        for _ in 0..max_iter {
            v = step(&v);
            normalize(&mut v);
            let q = rayleigh(&v);
            if (q - prev).abs() <= rel_tol * q.abs() {
                return Ok(q);
            }
            prev = q;
        }
        Err(Error::InvalidInput(format!("power iteration did not converge in {max_iter} steps")))
    };
    let lambda_max = iterate(&|v| sigma.mul_vec(v))?;
    // Σ⁻¹ v by forward and back substitution with L Lᵀ = Σ
    let solve = |v: &[f64]| {
        let mut z = v.to_vec();
        for i in 0..p {
            let s: f64 = (0..i).map(|k| l[(i, k)] * z[k]).sum();
            z[i] = (z[i] - s) / l[(i, i)];
        }
        for i in (0..p).rev() {
            let s: f64 = (i + 1..p).map(|k| l[(k, i)] * z[k]).sum();
            z[i] = (z[i] - s) / l[(i, i)];
        }
        z
    };
    let lambda_min = iterate(&solve)?;
    Ok((lambda_min, lambda_max))
}

/// Spectrum of `Σ` and the three sufficient conditions for sign consistency
/// of thresholded Justice Pursuit under a Gaussian design.
#[allow(clippy::too_many_arguments)]
pub fn covariance_diagnostics(
    sigma: &DenseMatrix,
    n: usize,
    s: usize,
    k: usize,
    beta_min: f64,
    sigma_noise: f64,
    lambda: f64,
    constants: &BoundConstants,
) -> Result<CovarianceReport> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be positive".into()));
    }
    if !(sigma_noise >= 0.0) || !(lambda > 0.0) {
        return Err(Error::InvalidInput("need sigma >= 0 and lambda > 0".into()));
    }
    let p = sigma.rows();
    let (lambda_min, lambda_max) = extreme_eigenvalues(sigma)?;
    let kappa = lambda_max / lambda_min;
    let (nf, pf) = (n as f64, p as f64);

    let rhs13 = constants.c * kappa / lambda_min * s as f64 * pf.ln();
    let lhs14 = if k == 0 { f64::INFINITY } else { nf / k as f64 };
    let rhs14 = (1.0 / constants.c_prime).max(kappa / constants.c_double_prime);
    let denom = (lambda_min / 4.0 * ((pf / nf).sqrt() - 1.0).powi(2) + 1.0).sqrt();
    let rhs15 = 10.0 * 2f64.sqrt() * lambda.max(1.0) * sigma_noise * (pf + nf).sqrt() / denom;
    Ok(CovarianceReport {
        lambda_min,
        lambda_max,
        kappa,
        sample_size: BoundCheck {
            lhs: nf,
            rhs: rhs13,
            holds: nf >= rhs13,
        },
        corruption_fraction: BoundCheck {
            lhs: lhs14,
            rhs: rhs14,
            holds: lhs14 >= rhs14,
        },
        beta_min: BoundCheck {
            lhs: beta_min,
            rhs: rhs15,
            holds: beta_min > rhs15,
        },
    })
}
