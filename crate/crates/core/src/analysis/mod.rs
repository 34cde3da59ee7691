//! Exact small-instance checks of identifiability and of the stable null
//! space property, and covariance diagnostics for the Gaussian-design
//! sign-consistency conditions.
//!
//! Both checks maximize a piecewise-linear, positively homogeneous function
//! of `β` over the null set `{(β, ω) : Xβ + c ω = 0}`, where `ω` is a linear
//! function of `β`. Homogeneity restricts the search to the ℓ₁ sphere
//! `‖β‖₁ = 1`; fixing the sign orthant of `β` turns the sphere into a simplex
//! and every check into one small LP per orthant.

mod covariance;
mod identifiability;
mod nsp;

pub use covariance::{
    covariance_diagnostics, extreme_eigenvalues, power_iteration_extremes, BoundCheck, CovarianceReport,
    BoundConstants,
};
pub use identifiability::{
    check_identifiability, IdentifiabilityMethod, IdentifiabilityVerdict, NullWitness,
};
pub use nsp::{check_stable_nsp, NspVerdict, DEFAULT_NSP_RHO};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpStatus, SolverOptions, DEFAULT_VERTEX_BUDGET};

/// Values of the orthant maximum inside `(−MARGIN, MARGIN)` are not
/// distinguished from zero.
pub const MARGIN: f64 = 1e-9;

/// Limits on exhaustive searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisBudget {
    /// Largest number of orthant LPs solved by one check.
    pub max_orthants: u64,
    /// Largest number of column subsets tried by the vertex oracle.
    pub max_bases: u128,
}

impl Default for AnalysisBudget {
    fn default() -> Self {
        // 2^13 sign orthants: p = 13 for identifiability, p = 14 for NSP with T = ∅
        Self {
            max_orthants: 1 << 13,
            max_bases: DEFAULT_VERTEX_BUDGET,
        }
    }
}

/// Number of orthants for `free_signs` independent sign choices, checked
/// against the budget.
fn orthant_count(free_signs: usize, budget: &AnalysisBudget) -> Result<u64> {
    let needed: u128 = if free_signs >= 127 { u128::MAX } else { 1u128 << free_signs };
    if needed > u128::from(budget.max_orthants) {
        return Err(Error::BudgetExceeded {
            needed,
            budget: u128::from(budget.max_orthants),
        });
    }
    Ok(needed as u64)
}

/// `±1` pattern of length `len` encoded by the bits of `code`.
fn signs_of(code: u64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| if code >> j & 1 == 1 { -1.0 } else { 1.0 })
        .collect()
}

/// `(value, LP solution, orthant code)`
type OrthantMax = (f64, Vec<f64>, u64);

/// Solves one LP per orthant code and returns the largest `−objective`
/// with the corresponding solution and code. Infeasible orthants are skipped;
/// ties keep the smallest code.
fn max_over_orthants(
    count: u64,
    build: impl Fn(u64) -> Result<LpProblem<f64>> + Sync,
    opts: &SolverOptions,
) -> Result<Option<OrthantMax>> {
    let results: Vec<Result<Option<OrthantMax>>> = (0..count)
        .into_par_iter()
        .map(|code| {
            let prob = build(code)?;
            let sol = solve_lp(&prob, opts)?;
            match sol.status {
                LpStatus::Optimal => Ok(Some((-sol.objective, sol.x, code))),
                LpStatus::Infeasible => Ok(None),
                s => Err(Error::Solver(s)),
            }
        })
        .collect();
    let mut best: Option<OrthantMax> = None;
    for r in results {
        if let Some(cand) = r? {
            if best.as_ref().is_none_or(|b| cand.0 > b.0) {
                best = Some(cand);
            }
        }
    }
    Ok(best)
}
