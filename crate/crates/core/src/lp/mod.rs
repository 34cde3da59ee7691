//! Exact ℓ₁ programs (Basis Pursuit, Justice Pursuit and its noise-dictionary
//! augmentation) reduced to standard-form linear programs and solved with a
//! dense revised simplex. A brute-force vertex enumerator is kept alongside as
//! an independent oracle for tiny instances.

pub(crate) mod jp;
pub(crate) mod problem;
mod simplex;
mod vertex;

use serde::{Deserialize, Serialize};

pub use jp::{
    probe_uniqueness, solve_augmented_jp, solve_bp, solve_jp, solve_l1, JpSolution, L1Block,
};
pub use problem::{formulate_augmented_jp, formulate_jp, formulate_l1, LpProblem, SplitMap, VarBlock, VarRole};
pub use simplex::{solve_lp, LpSolution};
pub use vertex::{binomial, enumerate_vertex_optima, VertexOptima, DEFAULT_VERTEX_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot budget exhausted, singular refactorization, or a final residual
    /// above tolerance.
    ToleranceFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotRule {
    Bland,
    /// Most negative reduced cost; switches to Bland's rule once
    /// `bland_after` pivots have been spent.
    DantzigWithBlandFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Smallest admissible pivot element in the ratio test.
    pub pivot_tol: f64,
    /// `None` means `50 · (m + N)`.
    pub max_pivots: Option<usize>,
    /// `None` means `10 · (m + N)`.
    pub bland_after: Option<usize>,
    pub pivot_rule: PivotRule,
    /// Basis inverse is recomputed from scratch every this many pivots.
    pub refactor_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            opt_tol: 1e-9,
            pivot_tol: 1e-11,
            max_pivots: None,
            bland_after: None,
            pivot_rule: PivotRule::DantzigWithBlandFallback,
            refactor_every: 64,
        }
    }
}

impl SolverOptions {
    /// Defaults with tolerances matched to the precision of `T`.
    pub fn for_scalar<T: crate::Scalar>() -> Self {
        Self {
            feas_tol: T::DEFAULT_TOL,
            opt_tol: T::DEFAULT_TOL,
            pivot_tol: T::DEFAULT_TOL * 1e-2,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        let positive = [self.feas_tol, self.opt_tol, self.pivot_tol]
            .iter()
            .all(|t| *t > 0.0 && t.is_finite());
        if !positive || self.max_pivots == Some(0) || self.refactor_every == 0 {
            return Err(crate::Error::InvalidInput(
                "solver tolerances must be positive and pivot limits at least 1".into(),
            ));
        }
        Ok(())
    }
}
