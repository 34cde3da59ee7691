use serde::{Deserialize, Serialize};

use super::{max_over_orthants, orthant_count, signs_of, AnalysisBudget, MARGIN};
use crate::error::{Error, Result};
use crate::lp::{LpProblem, SolverOptions};
use crate::matrix::Matrix;
use crate::DenseMatrix;

/// With `ρ = 1/3` the stability constant `2(1+ρ)/(1−ρ)` equals 4.
pub const DEFAULT_NSP_RHO: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NspVerdict {
    pub holds: bool,
    /// Maximum of `‖β_S‖₁ + λ‖ω_T‖₁ − ρ(‖β_{S̄}‖₁ + λ‖ω_{T̄}‖₁)` over the null
    /// set intersected with `‖β‖₁ = 1`.
    pub max_value: f64,
    /// Maximizing `(β, ω)`, with `Xβ + √n ω = 0`.
    pub beta: Vec<f64>,
    pub omega: Vec<f64>,
}

fn index_mask(len: usize, idx: &[usize], what: &str) -> Result<Vec<bool>> {
    let mut mask = vec![false; len];
    for &i in idx {
        if i >= len {
            return Err(Error::InvalidInput(format!("{what} index {i} out of range for length {len}")));
        }
        mask[i] = true;
    }
    Ok(mask)
}

/// Checks the stable null space property: every `(β, ω) ≠ 0` with
/// `Xβ + √n ω = 0` satisfies
/// `‖β_S‖₁ + λ‖ω_T‖₁ ≤ ρ (‖β_{S̄}‖₁ + λ‖ω_{T̄}‖₁)`.
///
/// One LP per sign pattern of `β` (first sign fixed by symmetry) and of
/// `ω_T`; orthants with no point on the null set are skipped.
pub fn check_stable_nsp(
    x: &DenseMatrix,
    s0: &[usize],
    t0: &[usize],
    lambda: f64,
    rho: f64,
    budget: &AnalysisBudget,
    opts: &SolverOptions,
) -> Result<NspVerdict> {
    let (n, p) = x.shape();
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!("rho must be >= 0, got {rho}")));
    }
    let in_s = index_mask(p, s0, "S0")?;
    let in_t = index_mask(n, t0, "T0")?;
    let t_rows: Vec<usize> = (0..n).filter(|&i| in_t[i]).collect();
    let off_rows: Vec<usize> = (0..n).filter(|&i| !in_t[i]).collect();
    let (kt, m) = (t_rows.len(), off_rows.len());
    let count = orthant_count(p - 1 + kt, budget)?;
    // ω = Bβ on the null set
    let bmat = x.scale(-1.0 / (n as f64).sqrt());
    let build = |code: u64| -> Result<LpProblem<f64>> {
        let mut sigma = vec![1.0];
        sigma.extend(signs_of(code, p - 1));
        let tau = signs_of(code >> (p - 1), kt);
        // columns: u (p) | s (kt) | r⁺ (m) | r⁻ (m)
        let cols = p + kt + 2 * m;
        let mut mat = Matrix::zeros(1 + n, cols);
        let mut cost = vec![rho * lambda; cols];
        for j in 0..p {
            mat[(0, j)] = 1.0;
            cost[j] = if in_s[j] { -1.0 } else { rho };
        }
        for (r, &i) in t_rows.iter().enumerate() {
            for j in 0..p {
                mat[(1 + r, j)] = tau[r] * bmat[(i, j)] * sigma[j];
            }
            mat[(1 + r, p + r)] = -1.0;
            cost[p + r] = -lambda;
        }
        for (r, &i) in off_rows.iter().enumerate() {
            let row = 1 + kt + r;
            for j in 0..p {
                mat[(row, j)] = bmat[(i, j)] * sigma[j];
            }
            mat[(row, p + kt + r)] = -1.0;
            mat[(row, p + kt + m + r)] = 1.0;
        }
        let mut b = vec![0.0; 1 + n];
        b[0] = 1.0;
        LpProblem::standard(mat, b, cost)
    };
    let (max_value, sol, code) =
        max_over_orthants(count, build, opts)?.expect("the orthant of the first feasible β is never empty");
    let mut sigma = vec![1.0];
    sigma.extend(signs_of(code, p - 1));
    let beta: Vec<f64> = (0..p).map(|j| sigma[j] * sol[j]).collect();
    let omega = bmat.mul_vec(&beta);
    Ok(NspVerdict {
        holds: max_value <= MARGIN,
        max_value,
        beta,
        omega,
    })
}
