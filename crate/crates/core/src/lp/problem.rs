use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarRole {
    /// Regression coefficients.
    Beta,
    /// Sparse corruptions.
    Omega,
    /// Noise-dictionary coefficients.
    Gamma,
}

/// A contiguous run of signed variables sharing one role and one ℓ₁ weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub role: VarRole,
    /// Index of the block's first signed variable.
    pub offset: usize,
    pub len: usize,
    pub weight: f64,
}

/// Signed variable `i` is represented by the nonnegative pair of LP columns
/// `(2i, 2i + 1)` as `v = v⁺ − v⁻`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMap {
    pub blocks: Vec<VarBlock>,
}

impl SplitMap {
    pub fn signed_len(&self) -> usize {
        self.blocks.iter().map(|b| b.len).sum()
    }

    pub fn split_pair(&self, signed_index: usize) -> (usize, usize) {
        (2 * signed_index, 2 * signed_index + 1)
    }

    pub fn block(&self, role: VarRole) -> Option<&VarBlock> {
        self.blocks.iter().find(|b| b.role == role)
    }

    /// `v⁺ − v⁻` for every signed variable.
    pub fn recompose<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        (0..self.signed_len())
            .map(|i| x[2 * i] - x[2 * i + 1])
            .collect()
    }

    /// Largest `min(v⁺, v⁻)` over all pairs; zero at a proper vertex.
    pub fn max_pair_overlap<T: Scalar>(&self, x: &[T]) -> T {
        (0..self.signed_len()).fold(T::zero(), |acc, i| acc.max(x[2 * i].min(x[2 * i + 1])))
    }
}

/// `min cᵀx  s.t.  A x = b,  x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem<T> {
    pub a: Matrix<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    /// Present when the program is an ℓ₁ problem in split form.
    pub var_map: Option<SplitMap>,
}

impl<T: Scalar> LpProblem<T> {
    pub fn standard(a: Matrix<T>, b: Vec<T>, c: Vec<T>) -> Result<Self> {
        let prob = Self {
            a,
            b,
            c,
            var_map: None,
        };
        prob.check()?;
        Ok(prob)
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    pub fn objective(&self, x: &[T]) -> T {
        crate::matrix::dot(&self.c, x)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.b.len() != self.a.rows() || self.c.len() != self.a.cols() {
            return Err(Error::Dimension(format!(
                "A is {}x{}, b has {} entries, c has {}",
                self.a.rows(),
                self.a.cols(),
                self.b.len(),
                self.c.len()
            )));
        }
        if self.b.iter().chain(&self.c).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("LP data must be finite".into()));
        }
        Ok(())
    }
}

/// Split-variable LP for `min Σ_k w_k ‖v_k‖₁  s.t.  Σ_k A_k v_k = y`.
pub fn formulate_l1<T: Scalar>(
    blocks: &[(VarRole, &Matrix<T>, T)],
    y: &[T],
) -> Result<LpProblem<T>> {
    let m = y.len();
    if m == 0 {
        return Err(Error::Dimension("empty response".into()));
    }
    let mut signed_cols = 0;
    let mut map = Vec::with_capacity(blocks.len());
    for (role, a, w) in blocks {
        if a.rows() != m {
            return Err(Error::Dimension(format!(
                "block {role:?} has {} rows, response has {m}",
                a.rows()
            )));
        }
        if !(*w > T::zero()) || !w.is_finite() {
            return Err(Error::InvalidInput(format!(
                "weight of block {role:?} must be positive, got {w}"
            )));
        }
        map.push(VarBlock {
            role: *role,
            offset: signed_cols,
            len: a.cols(),
            weight: w.as_f64(),
        });
        signed_cols += a.cols();
    }
    if signed_cols == 0 {
        return Err(Error::Dimension("no variables".into()));
    }
    let mut a = Matrix::zeros(m, 2 * signed_cols);
    let mut c = vec![T::zero(); 2 * signed_cols];
    for ((_, block, w), vb) in blocks.iter().zip(&map) {
        for j in 0..block.cols() {
            let s = vb.offset + j;
            c[2 * s] = *w;
            c[2 * s + 1] = *w;
            for i in 0..m {
                let v = block[(i, j)];
                a[(i, 2 * s)] = v;
                a[(i, 2 * s + 1)] = -v;
            }
        }
    }
    let prob = LpProblem {
        a,
        b: y.to_vec(),
        c,
        var_map: Some(SplitMap { blocks: map }),
    };
    prob.check()?;
    Ok(prob)
}

/// `√n · I_𝓜`: the columns of the scaled identity indexed by `rows`.
pub(crate) fn corruption_block<T: Scalar>(n: usize, rows: &[usize]) -> Matrix<T> {
    let s = T::of(n as f64).sqrt();
    Matrix::from_fn(n, rows.len(), |i, j| if rows[j] == i { s } else { T::zero() })
}

/// Validated corruption rows together with their `√n · I_𝓜` block.
pub(crate) fn corruption_block_for<T: Scalar>(
    n: usize,
    cols: Option<&[usize]>,
) -> Result<(Matrix<T>, Vec<usize>)> {
    let rows = corruption_rows(n, cols)?;
    Ok((corruption_block(n, &rows), rows))
}

/// Resolves an optional corruption index set to a sorted, validated list; `None` is `[n]`.
pub(crate) fn corruption_rows(n: usize, cols: Option<&[usize]>) -> Result<Vec<usize>> {
    match cols {
        None => Ok((0..n).collect()),
        Some(idx) => {
            let mut v = idx.to_vec();
            v.sort_unstable();
            v.dedup();
            if v.len() != idx.len() {
                return Err(Error::InvalidInput("duplicate corruption row index".into()));
            }
            if let Some(bad) = v.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidInput(format!(
                    "corruption row {bad} out of range for n = {n}"
                )));
            }
            Ok(v)
        }
    }
}

fn check_jp_inputs<T: Scalar>(x: &Matrix<T>, y: &[T], lambda: T) -> Result<()> {
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

/// Justice Pursuit `min ‖β‖₁ + λ‖ω‖₁  s.t.  Xβ + √n I_𝓜 ω = y` in split form.
/// `corruption_cols = None` uses every row.
pub fn formulate_jp<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    lambda: T,
    corruption_cols: Option<&[usize]>,
) -> Result<LpProblem<T>> {
    check_jp_inputs(x, y, lambda)?;
    let rows = corruption_rows(x.rows(), corruption_cols)?;
    let omega = corruption_block(x.rows(), &rows);
    formulate_l1(
        &[(VarRole::Beta, x, T::one()), (VarRole::Omega, &omega, lambda)],
        y,
    )
}

/// Justice Pursuit with a noise dictionary: adds `G γ` with unit-weight `‖γ‖₁`.
pub fn formulate_augmented_jp<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    lambda: T,
    g: &Matrix<T>,
    corruption_cols: Option<&[usize]>,
) -> Result<LpProblem<T>> {
    check_jp_inputs(x, y, lambda)?;
    let n = x.rows();
    if g.rows() != n || g.cols() != n {
        return Err(Error::Dimension(format!(
            "noise dictionary must be {n}x{n}, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let rows = corruption_rows(n, corruption_cols)?;
    let omega = corruption_block(n, &rows);
    formulate_l1(
        &[
            (VarRole::Beta, x, T::one()),
            (VarRole::Omega, &omega, lambda),
            (VarRole::Gamma, g, T::one()),
        ],
        y,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_jp_bookkeeping() {
        let x = Matrix::new(1, 1, vec![1.0]).unwrap();
        let prob = formulate_jp(&x, &[3.0], 2.0, None).unwrap();
        assert_eq!(prob.rows(), 1);
        assert_eq!(prob.cols(), 4);
        assert_eq!(prob.c, vec![1.0, 1.0, 2.0, 2.0]);
        assert_eq!(prob.a.row(0), &[1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn restricted_corruption_block() {
        let x = Matrix::<f64>::identity(5);
        let prob = formulate_jp(&x, &[0.0; 5], 1.0, Some(&[3, 1])).unwrap();
        let map = prob.var_map.as_ref().unwrap();
        let om = map.block(VarRole::Omega).unwrap();
        assert_eq!((om.offset, om.len), (5, 2));
        let s5 = 5f64.sqrt();
        // sorted: first ω column is row 1, second is row 3
        let (p1, m1) = map.split_pair(5);
        assert_eq!(prob.a[(1, p1)], s5);
        assert_eq!(prob.a[(1, m1)], -s5);
        let (p2, _) = map.split_pair(6);
        assert_eq!(prob.a[(3, p2)], s5);
        let col_nnz = (0..5).filter(|&i| prob.a[(i, p1)] != 0.0).count();
        assert_eq!(col_nnz, 1);
    }

    #[test]
    fn rejects_bad_lambda_and_indices() {
        let x = Matrix::<f64>::identity(2);
        assert!(formulate_jp(&x, &[1.0, 1.0], 0.0, None).is_err());
        assert!(formulate_jp(&x, &[1.0, 1.0], -1.0, None).is_err());
        assert!(formulate_jp(&x, &[1.0, 1.0], 1.0, Some(&[2])).is_err());
        assert!(formulate_jp(&x, &[1.0, 1.0], 1.0, Some(&[0, 0])).is_err());
        assert!(formulate_jp(&x, &[1.0], 1.0, None).is_err());
        let g = Matrix::<f64>::identity(3);
        assert!(formulate_augmented_jp(&x, &[1.0, 1.0], 1.0, &g, None).is_err());
    }
}
