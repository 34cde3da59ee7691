use serde::{Deserialize, Serialize};

use super::{max_over_orthants, orthant_count, signs_of, AnalysisBudget, MARGIN};
use crate::error::{Error, Result};
use crate::lp::{enumerate_vertex_optima, formulate_jp, probe_uniqueness, solve_lp, LpProblem, SolverOptions};
use crate::matrix::Matrix;
use crate::rng::RngStream;
use crate::signs::SignVector;
use crate::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifiabilityMethod {
    SignPatternLp,
    VertexOracle,
    PerturbationProbe,
}

/// A nonzero `(β, ω)` with `Xβ + √n λ⁻¹ ω = 0` violating the strict inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullWitness {
    pub beta: Vec<f64>,
    pub omega: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityVerdict {
    pub identifiable: bool,
    /// `false` when the answer rests on a probe or on a maximum inside the
    /// `±1e−9` band.
    pub certified: bool,
    pub method: IdentifiabilityMethod,
    /// Maximum of `|θᵀβ + θ̃ᵀω| − ‖β_{S̄}‖₁ − ‖ω_{T̄}‖₁` over the null set
    /// intersected with `‖β‖₁ = 1` (sign-pattern method only).
    pub margin: Option<f64>,
    pub witness: Option<NullWitness>,
}

impl NullWitness {
    /// `|θᵀβ + θ̃ᵀω| − ‖β_{S̄}‖₁ − ‖ω_{T̄}‖₁`; nonnegative for a genuine witness.
    pub fn violation(&self, theta: &SignVector, theta_tilde: &SignVector) -> f64 {
        violation(&self.beta, &self.omega, theta, theta_tilde)
    }

    /// `‖Xβ + √n λ⁻¹ ω‖∞`.
    pub fn null_residual(&self, x: &DenseMatrix, lambda: f64) -> f64 {
        let c = (x.rows() as f64).sqrt() / lambda;
        x.mul_vec(&self.beta)
            .iter()
            .zip(&self.omega)
            .map(|(a, b)| (a + c * b).abs())
            .fold(0.0, f64::max)
    }
}

fn violation(beta: &[f64], omega: &[f64], theta: &SignVector, theta_tilde: &SignVector) -> f64 {
    let mut inner = 0.0;
    let mut off = 0.0;
    for (v, s) in beta.iter().zip(theta.as_slice()).chain(omega.iter().zip(theta_tilde.as_slice())) {
        if *s == 0 {
            off += v.abs();
        } else {
            inner += f64::from(*s) * v;
        }
    }
    inner.abs() - off
}

fn check_inputs(x: &DenseMatrix, theta: &SignVector, theta_tilde: &SignVector, lambda: f64) -> Result<()> {
    if theta.len() != x.cols() || theta_tilde.len() != x.rows() {
        return Err(Error::Dimension(format!(
            "sign vectors must have lengths p = {} and n = {}, got {} and {}",
            x.cols(),
            x.rows(),
            theta.len(),
            theta_tilde.len()
        )));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Decides whether the sign pair `(θ, θ̃)` is identifiable for `X` and `λ`,
/// i.e. whether every `(β⁰, ω⁰)` with these signs is the unique Justice
/// Pursuit solution at `y = Xβ⁰ + √n ω⁰`.
///
/// `method = None` runs the sign-pattern LPs and falls back to the
/// (uncertified) perturbation probe when the orthant budget is exceeded; an
/// explicit method fails with `BudgetExceeded` instead.
pub fn check_identifiability(
    x: &DenseMatrix,
    theta: &SignVector,
    theta_tilde: &SignVector,
    lambda: f64,
    method: Option<IdentifiabilityMethod>,
    budget: &AnalysisBudget,
    opts: &SolverOptions,
) -> Result<IdentifiabilityVerdict> {
    check_inputs(x, theta, theta_tilde, lambda)?;
    match method {
        Some(IdentifiabilityMethod::SignPatternLp) => sign_pattern_lp(x, theta, theta_tilde, lambda, budget, opts),
        Some(IdentifiabilityMethod::VertexOracle) => vertex_oracle(x, theta, theta_tilde, lambda, budget),
        Some(IdentifiabilityMethod::PerturbationProbe) => perturbation_probe(x, theta, theta_tilde, lambda, opts),
        None => match sign_pattern_lp(x, theta, theta_tilde, lambda, budget, opts) {
            Err(Error::BudgetExceeded { .. }) => {
                log::warn!("orthant budget exceeded; falling back to the perturbation probe");
                perturbation_probe(x, theta, theta_tilde, lambda, opts)
            }
            other => other,
        },
    }
}

/// On the null set `ω = Aβ` with `A = −(λ/√n) X`. The target is even in `β`,
/// so `|·|` can be dropped and the first sign fixed to `+`.
fn sign_pattern_lp(
    x: &DenseMatrix,
    theta: &SignVector,
    theta_tilde: &SignVector,
    lambda: f64,
    budget: &AnalysisBudget,
    opts: &SolverOptions,
) -> Result<IdentifiabilityVerdict> {
    let (n, p) = x.shape();
    // the objective is signed, so β ↦ −β is not a symmetry here
    let count = orthant_count(p, budget)?;
    let a = x.scale(-lambda / (n as f64).sqrt());
    let th = theta.to_values::<f64>();
    let tt = theta_tilde.to_values::<f64>();
    // c = θ + Aᵀθ̃
    let c: Vec<f64> = (0..p)
        .map(|j| th[j] + (0..n).map(|i| a[(i, j)] * tt[i]).sum::<f64>())
        .collect();
    let off_rows: Vec<usize> = (0..n).filter(|&i| tt[i] == 0.0).collect();
    let m = off_rows.len();
    let build = |code: u64| -> Result<LpProblem<f64>> {
        let sigma = signs_of(code, p);
        let cols = p + 2 * m;
        let mut mat = Matrix::zeros(1 + m, cols);
        let mut cost = vec![1.0; cols];
        for j in 0..p {
            mat[(0, j)] = 1.0;
            cost[j] = -c[j] * sigma[j] + if th[j] == 0.0 { 1.0 } else { 0.0 };
        }
        for (r, &i) in off_rows.iter().enumerate() {
            for j in 0..p {
                mat[(1 + r, j)] = a[(i, j)] * sigma[j];
            }
            mat[(1 + r, p + r)] = -1.0;
            mat[(1 + r, p + m + r)] = 1.0;
        }
        let mut b = vec![0.0; 1 + m];
        b[0] = 1.0;
        LpProblem::standard(mat, b, cost)
    };
    let (value, sol, code) = max_over_orthants(count, build, opts)?.expect("the simplex orthant is never empty");
    let sigma = signs_of(code, p);
    let beta: Vec<f64> = (0..p).map(|j| sigma[j] * sol[j]).collect();
    let omega = a.mul_vec(&beta);
    let identifiable = value <= -MARGIN;
    Ok(IdentifiabilityVerdict {
        identifiable,
        certified: value <= -MARGIN || value >= MARGIN,
        method: IdentifiabilityMethod::SignPatternLp,
        margin: Some(value),
        witness: (!identifiable).then_some(NullWitness { beta, omega }),
    })
}

/// Representative `(β⁰, ω⁰) = (θ, θ̃)` and the JP program at its response.
fn representative_problem(
    x: &DenseMatrix,
    theta: &SignVector,
    theta_tilde: &SignVector,
    lambda: f64,
) -> Result<(LpProblem<f64>, Vec<f64>)> {
    let n = x.rows();
    let th = theta.to_values::<f64>();
    let tt = theta_tilde.to_values::<f64>();
    let sq = (n as f64).sqrt();
    let y: Vec<f64> = x.mul_vec(&th).iter().zip(&tt).map(|(a, b)| a + sq * b).collect();
    let prob = formulate_jp(x, &y, lambda, None)?;
    Ok((prob, [th, tt].concat()))
}

fn close(a: &[f64], b: &[f64]) -> bool {
    let scale = 1.0 + a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).all(|(u, v)| (u - v).abs() <= 1e-7 * scale)
}

/// The direction from `(β⁰, ω⁰)` to another optimum, in the `λω` scaling
/// used by the null-set condition.
fn witness_from(point: &[f64], reference: &[f64], p: usize, lambda: f64) -> NullWitness {
    NullWitness {
        beta: (0..p).map(|j| point[j] - reference[j]).collect(),
        omega: (p..point.len()).map(|i| lambda * (point[i] - reference[i])).collect(),
    }
}

fn vertex_oracle(
    x: &DenseMatrix,
    theta: &SignVector,
    theta_tilde: &SignVector,
    lambda: f64,
    budget: &AnalysisBudget,
) -> Result<IdentifiabilityVerdict> {
    let p = x.cols();
    let (prob, reference) = representative_problem(x, theta, theta_tilde, lambda)?;
    let optima = enumerate_vertex_optima(&prob, 1e-9, budget.max_bases)?;
    let map = prob.var_map.as_ref().expect("split map");
    let points: Vec<Vec<f64>> = optima.points.iter().map(|v| map.recompose(v)).collect();
    let identifiable = points.len() == 1 && close(&points[0], &reference);
    let witness = (!identifiable).then(|| {
        let other = points
            .iter()
            .find(|pt| !close(pt, &reference))
            .expect("a non-identifiable pair has an optimum other than the representative");
        witness_from(other, &reference, p, lambda)
    });
    Ok(IdentifiabilityVerdict {
        identifiable,
        certified: true,
        method: IdentifiabilityMethod::VertexOracle,
        margin: None,
        witness,
    })
}

fn perturbation_probe(
    x: &DenseMatrix,
    theta: &SignVector,
    theta_tilde: &SignVector,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<IdentifiabilityVerdict> {
    let (prob, reference) = representative_problem(x, theta, theta_tilde, lambda)?;
    let sol = solve_lp(&prob, opts)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(sol.status));
    }
    let point = prob.var_map.as_ref().expect("split map").recompose(&sol.x);
    let identifiable = close(&point, &reference)
        && probe_uniqueness(&prob, opts, 16, 1e-6, &RngStream::new(0x1dea))?;
    Ok(IdentifiabilityVerdict {
        identifiable,
        certified: false,
        method: IdentifiabilityMethod::PerturbationProbe,
        margin: None,
        witness: None,
    })
}
