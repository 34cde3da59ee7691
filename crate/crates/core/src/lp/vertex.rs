//! Brute-force enumeration of basic feasible solutions.
//!
//! Every choice of `rank(A)` columns is tried; nonsingular choices with a
//! nonnegative basic solution are vertices of the feasible polyhedron. The
//! enumerator shares no code path with the simplex beyond the problem
//! definition, which is what makes it useful as a test oracle.

use itertools::Itertools;

use super::LpProblem;
use crate::error::{Error, Result};
use crate::matrix::{solve_dense, Matrix};
use crate::scalar::{max_abs, Scalar};

pub const DEFAULT_VERTEX_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct VertexOptima<T> {
    /// `None` when the feasible set is empty.
    pub objective: Option<T>,
    /// Distinct optimal vertices.
    pub points: Vec<Vec<T>>,
    /// Number of feasible bases visited.
    pub feasible_bases: usize,
}

impl<T> VertexOptima<T> {
    pub fn is_unique(&self) -> bool {
        self.points.len() == 1
    }
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Keeps a maximal set of linearly independent rows of `[A | b]`; returns
/// `None` if a dependent row is inconsistent (empty feasible set).
fn independent_rows<T: Scalar>(a: &Matrix<T>, b: &[T], tol: T) -> Option<Vec<usize>> {
    let n = a.cols();
    let mut kept: Vec<usize> = Vec::new();
    // orthonormalized rows and the matching combination of b
    let mut basis: Vec<(Vec<T>, T)> = Vec::new();
    for i in 0..a.rows() {
        let mut r = a.row(i).to_vec();
        let mut rb = b[i];
        let scale = T::one() + max_abs(&r);
        for _ in 0..2 {
            for (q, qb) in &basis {
                let proj = crate::matrix::dot(&r, q);
                for (rk, qk) in r.iter_mut().zip(q) {
                    *rk -= proj * *qk;
                }
                rb -= proj * *qb;
            }
        }
        let norm = crate::scalar::l2_norm(&r);
        if norm <= tol * scale * T::of(n as f64) {
            if rb.abs() > tol * (T::one() + b[i].abs()) * T::of(1e3) {
                return None;
            }
            continue;
        }
        for rk in r.iter_mut() {
            *rk /= norm;
        }
        basis.push((r, rb / norm));
        kept.push(i);
    }
    Some(kept)
}

/// All optimal basic feasible solutions of `prob`, deduplicated.
///
/// `tol` is used both for feasibility (`x ≥ −tol`) and for deciding that two
/// objective values or two points coincide (relative to their magnitude).
pub fn enumerate_vertex_optima<T: Scalar>(
    prob: &LpProblem<T>,
    tol: T,
    budget: u128,
) -> Result<VertexOptima<T>> {
    prob.check()?;
    let Some(rows) = independent_rows(&prob.a, &prob.b, T::of(1e-12)) else {
        return Ok(VertexOptima {
            objective: None,
            points: Vec::new(),
            feasible_bases: 0,
        });
    };
    let n = prob.cols();
    let m = rows.len();
    let needed = binomial(n, m);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let b: Vec<T> = rows.iter().map(|&i| prob.b[i]).collect();
    let pivot_tol = T::of(1e-10);
    let mut vertices: Vec<(T, Vec<T>)> = Vec::new();
    let mut feasible_bases = 0;
    if m == 0 {
        // only x = 0 satisfies the (all-zero) constraints at a vertex
        let x = vec![T::zero(); n];
        return Ok(VertexOptima {
            objective: Some(prob.objective(&x)),
            points: vec![x],
            feasible_bases: 1,
        });
    }
    for cols in (0..n).combinations(m) {
        let bmat = Matrix::from_fn(m, m, |i, k| prob.a[(rows[i], cols[k])]);
        let Some(xb) = solve_dense(&bmat, &b, pivot_tol) else {
            continue;
        };
        let scale = T::one() + max_abs(&xb);
        if xb.iter().any(|v| *v < -tol * scale) {
            continue;
        }
        feasible_bases += 1;
        let mut x = vec![T::zero(); n];
        for (k, &j) in cols.iter().enumerate() {
            x[j] = xb[k].max(T::zero());
        }
        vertices.push((prob.objective(&x), x));
    }
    let Some(best) = vertices.iter().map(|(o, _)| *o).reduce(T::min) else {
        return Ok(VertexOptima {
            objective: None,
            points: Vec::new(),
            feasible_bases,
        });
    };
    let obj_tol = tol * (T::one() + best.abs());
    let mut points: Vec<Vec<T>> = Vec::new();
    for (o, x) in vertices {
        if o > best + obj_tol {
            continue;
        }
        let dup = points.iter().any(|p| {
            let s = T::one() + max_abs(p).max(max_abs(&x));
            p.iter().zip(&x).all(|(u, v)| (*u - *v).abs() <= tol * s)
        });
        if !dup {
            points.push(x);
        }
    }
    Ok(VertexOptima {
        objective: Some(best),
        points,
        feasible_bases,
    })
}
