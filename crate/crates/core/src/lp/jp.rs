use rand::Rng;
use serde::{Deserialize, Serialize};

use super::problem::{corruption_block, corruption_rows};
use super::{formulate_l1, solve_lp, LpProblem, LpSolution, LpStatus, SolverOptions, VarRole};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;
use crate::scalar::{l1_norm, l2_norm, max_abs, Scalar};

/// Optimizer of a (possibly augmented) Justice Pursuit program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JpSolution<T> {
    pub beta: Vec<T>,
    /// Corruption coefficients, one per entry of `corruption_rows`.
    pub omega: Vec<T>,
    pub gamma: Option<Vec<T>>,
    pub corruption_rows: Vec<usize>,
    /// `‖β‖₁ + λ‖ω‖₁ (+ ‖γ‖₁)`
    pub objective: T,
    /// `‖y − Xβ − √n I_𝓜 ω − Gγ‖₂`
    pub residual_norm: T,
    pub status: LpStatus,
    pub pivots: usize,
}

impl<T: Scalar> JpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Corruption vector in original row indexing (zero outside `corruption_rows`).
    pub fn omega_full(&self, n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n];
        for (v, &i) in self.omega.iter().zip(&self.corruption_rows) {
            out[i] = *v;
        }
        out
    }
}

/// One weighted block of an ℓ₁ program.
pub struct L1Block<'a, T> {
    pub role: VarRole,
    pub matrix: &'a Matrix<T>,
    pub weight: T,
}

/// Solves `min Σ w_k ‖v_k‖₁ s.t. Σ A_k v_k = y` and returns the signed blocks.
pub fn solve_l1<T: Scalar>(
    blocks: &[L1Block<'_, T>],
    y: &[T],
    opts: &SolverOptions,
) -> Result<(Vec<Vec<T>>, LpSolution<T>)> {
    let spec: Vec<_> = blocks.iter().map(|b| (b.role, b.matrix, b.weight)).collect();
    let prob = formulate_l1(&spec, y)?;
    let sol = solve_lp(&prob, opts)?;
    let map = prob.var_map.as_ref().expect("ℓ₁ formulation carries a split map");
    let signed = map.recompose(&sol.x);
    let parts = map
        .blocks
        .iter()
        .map(|b| signed[b.offset..b.offset + b.len].to_vec())
        .collect();
    Ok((parts, sol))
}

/// Objective, residual norm and the status after the residual check.
pub(crate) fn audit<T: Scalar>(
    blocks: &[L1Block<'_, T>],
    parts: &[Vec<T>],
    y: &[T],
    status: LpStatus,
    opts: &SolverOptions,
) -> (T, T, LpStatus) {
    let mut fitted = vec![T::zero(); y.len()];
    let mut objective = T::zero();
    for (blk, part) in blocks.iter().zip(parts) {
        objective += blk.weight * l1_norm(part);
        for (f, v) in fitted.iter_mut().zip(blk.matrix.mul_vec(part)) {
            *f += v;
        }
    }
    let resid: Vec<T> = y.iter().zip(&fitted).map(|(a, b)| *a - *b).collect();
    let residual_norm = l2_norm(&resid);
    let mut status = status;
    if status == LpStatus::Optimal
        && residual_norm > T::of(opts.feas_tol) * (T::one() + max_abs(y)) * T::of((y.len() as f64).sqrt())
    {
        status = LpStatus::ToleranceFailure;
    }
    (objective, residual_norm, status)
}

fn assemble<T: Scalar>(
    blocks: &[L1Block<'_, T>],
    y: &[T],
    rows: Vec<usize>,
    opts: &SolverOptions,
) -> Result<JpSolution<T>> {
    let (mut parts, sol) = solve_l1(blocks, y, opts)?;
    let (objective, residual_norm, status) = audit(blocks, &parts, y, sol.status, opts);
    let gamma = if parts.len() == 3 { parts.pop() } else { None };
    let omega = parts.pop().unwrap_or_default();
    let beta = parts.pop().unwrap_or_default();
    Ok(JpSolution {
        beta,
        omega,
        gamma,
        corruption_rows: rows,
        objective,
        residual_norm,
        status,
        pivots: sol.pivots,
    })
}

fn check_inputs<T: Scalar>(x: &Matrix<T>, y: &[T], lambda: T) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "X has {} rows but y has {} entries",
            x.rows(),
            y.len()
        )));
    }
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// Justice Pursuit: `min ‖β‖₁ + λ‖ω‖₁  s.t.  y = Xβ + √n I_𝓜 ω`.
pub fn solve_jp<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    lambda: T,
    corruption_cols: Option<&[usize]>,
    opts: &SolverOptions,
) -> Result<JpSolution<T>> {
    check_inputs(x, y, lambda)?;
    let rows = corruption_rows(x.rows(), corruption_cols)?;
    let omega = corruption_block(x.rows(), &rows);
    let blocks = [
        L1Block {
            role: VarRole::Beta,
            matrix: x,
            weight: T::one(),
        },
        L1Block {
            role: VarRole::Omega,
            matrix: &omega,
            weight: lambda,
        },
    ];
    assemble(&blocks, y, rows, opts)
}

/// Justice Pursuit augmented with an `n × n` noise dictionary `G`:
/// `min ‖β‖₁ + λ‖ω‖₁ + ‖γ‖₁  s.t.  y = Xβ + √n I_𝓜 ω + Gγ`.
pub fn solve_augmented_jp<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    lambda: T,
    g: &Matrix<T>,
    corruption_cols: Option<&[usize]>,
    opts: &SolverOptions,
) -> Result<JpSolution<T>> {
    check_inputs(x, y, lambda)?;
    let n = x.rows();
    if g.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "noise dictionary must be {n}x{n}, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let rows = corruption_rows(n, corruption_cols)?;
    let omega = corruption_block(n, &rows);
    let blocks = [
        L1Block {
            role: VarRole::Beta,
            matrix: x,
            weight: T::one(),
        },
        L1Block {
            role: VarRole::Omega,
            matrix: &omega,
            weight: lambda,
        },
        L1Block {
            role: VarRole::Gamma,
            matrix: g,
            weight: T::one(),
        },
    ];
    assemble(&blocks, y, rows, opts)
}

/// Basis Pursuit `min ‖z‖₁ s.t. X_aug z = y`.
pub fn solve_bp<T: Scalar>(x_aug: &Matrix<T>, y: &[T], opts: &SolverOptions) -> Result<Vec<T>> {
    let (mut parts, sol) = solve_l1(
        &[L1Block {
            role: VarRole::Beta,
            matrix: x_aug,
            weight: T::one(),
        }],
        y,
        opts,
    )?;
    if !sol.is_optimal() {
        return Err(Error::Solver(sol.status));
    }
    Ok(parts.pop().expect("one block"))
}

/// Re-solves `prob` with each cost perturbed by `±eps` (random signs) and
/// reports whether every perturbed optimum coincides with the unperturbed
/// one. A `false` answer flags a non-unique optimum; `true` is evidence, not
/// a certificate.
pub fn probe_uniqueness<T: Scalar>(
    prob: &LpProblem<T>,
    opts: &SolverOptions,
    trials: usize,
    eps: f64,
    stream: &RngStream,
) -> Result<bool> {
    let base = solve_lp(prob, opts)?;
    if !base.is_optimal() {
        return Err(Error::Solver(base.status));
    }
    let signed = |x: &[T]| match &prob.var_map {
        Some(map) => map.recompose(x),
        None => x.to_vec(),
    };
    let reference = signed(&base.x);
    let scale = T::one() + max_abs(&reference);
    for t in 0..trials {
        let mut rng = stream.child(t as u64).rng();
        let mut perturbed = prob.clone();
        for c in perturbed.c.iter_mut() {
            let s = if rng.random::<bool>() { eps } else { -eps };
            *c += T::of(s);
        }
        let sol = solve_lp(&perturbed, opts)?;
        if !sol.is_optimal() {
            return Err(Error::Solver(sol.status));
        }
        let other = signed(&sol.x);
        let gap = reference
            .iter()
            .zip(&other)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
        if gap > T::of(1e-6) * scale {
            return Ok(false);
        }
    }
    Ok(true)
}
