//! Sign-recovery metrics and the support-size oracle threshold.
//!
//! All metrics depend only on the estimate `β̂` and the truth `β⁰`.

use log::warn;

use crate::error::{Error, Result};

fn check_lengths(beta_hat: &[f64], beta0: &[f64]) -> Result<()> {
    if beta_hat.len() != beta0.len() {
        return Err(Error::Dimension(format!(
            "estimate has length {} but truth has length {}",
            beta_hat.len(),
            beta0.len()
        )));
    }
    Ok(())
}

fn correct_signs(beta_hat: &[f64], beta0: &[f64]) -> usize {
    beta_hat
        .iter()
        .zip(beta0)
        .filter(|(b, t)| (**t > 0.0 && **b > 0.0) || (**t < 0.0 && **b < 0.0))
        .count()
}

/// Share of the nonzero true coefficients whose sign is recovered.
///
/// Undefined for `β⁰ = 0`; report the sign-recovery indicator alone there.
pub fn s_tpp(beta_hat: &[f64], beta0: &[f64]) -> Result<f64> {
    check_lengths(beta_hat, beta0)?;
    let s0 = beta0.iter().filter(|v| **v != 0.0).count();
    if s0 == 0 {
        return Err(Error::InvalidInput(
            "s-TPP is undefined when the true vector is zero; use the sign-recovery indicator".into(),
        ));
    }
    Ok(correct_signs(beta_hat, beta0) as f64 / s0 as f64)
}

/// Share of discoveries whose sign is wrong, with `max{1, |Ŝ|}` in the denominator.
pub fn s_fdp(beta_hat: &[f64], beta0: &[f64]) -> Result<f64> {
    check_lengths(beta_hat, beta0)?;
    let discoveries = beta_hat.iter().filter(|v| **v != 0.0).count();
    if discoveries == 0 {
        return Ok(0.0);
    }
    // same rounding as 1 − s-TPP when |Ŝ| = |S⁰|
    Ok(1.0 - correct_signs(beta_hat, beta0) as f64 / discoveries as f64)
}

/// `1` iff `sign(β̂) = sign(β⁰)` componentwise.
pub fn psr_indicator(beta_hat: &[f64], beta0: &[f64]) -> Result<u8> {
    check_lengths(beta_hat, beta0)?;
    let same = beta_hat
        .iter()
        .zip(beta0)
        .all(|(b, t)| b.partial_cmp(&0.0) == t.partial_cmp(&0.0));
    Ok(u8::from(same))
}

/// Threshold leaving the `s` largest magnitudes of `beta_med` above it:
/// the largest magnitude strictly below the `s`-th largest, or 0 if there is
/// none. Entries tied with the `s`-th largest are all kept, so the support can
/// exceed `s`; fewer than `s` nonzero entries give a smaller support. Both
/// cases are logged.
pub fn oracle_s_threshold(beta_med: &[f64], s: usize) -> Result<f64> {
    let p = beta_med.len();
    if s == 0 || s > p {
        return Err(Error::InvalidInput(format!("support size must lie in 1..={p}, got {s}")));
    }
    let mut mags: Vec<f64> = beta_med.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let cut = mags[s - 1];
    let tau = mags[s..].iter().copied().find(|m| *m < cut).unwrap_or(0.0);
    let support = mags.iter().filter(|m| **m > tau).count();
    if support != s {
        warn!("oracle threshold keeps {support} entries instead of {s} (ties or too few nonzeros)");
    }
    Ok(tau)
}

/// Whether the `s`-th and `(s+1)`-th largest magnitudes coincide.
pub fn has_tie_at_cut(beta_med: &[f64], s: usize) -> bool {
    let mut mags: Vec<f64> = beta_med.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    s >= 1 && s < mags.len() && mags[s - 1] == mags[s]
}
