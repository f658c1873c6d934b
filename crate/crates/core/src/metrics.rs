//! Fit scores and the scale/sign normalization of Hammerstein estimates.
//!
//! `(alpha g, f / alpha)` produce identical input-output behavior for every
//! nonzero alpha, so estimates are compared only after fixing `||g|| = 1`
//! and the sign against the true impulse response.

use crate::basis::{apply_nonlinearity, BasisSet, NonlinearityCoefficients};
use crate::error::{check_len, KbhError, Result};

/// Entries at or below this magnitude do not decide the sign.
const SIGN_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub fit_g: f64,
    pub fit_f: f64,
    pub seed: u64,
    pub nu: usize,
    pub snr: f64,
    pub iterations: usize,
    pub seconds: f64,
}

fn unit_scale(g_hat: &[f64]) -> Result<f64> {
    let norm = g_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(KbhError::InvalidParameter(
            "cannot normalize a zero (or non-finite) impulse response".into(),
        ));
    }
    Ok(1.0 / norm)
}

fn rescale(g_hat: &[f64], c_hat: &[f64], alpha: f64) -> (Vec<f64>, Vec<f64>) {
    (
        g_hat.iter().map(|v| v * alpha).collect(),
        c_hat.iter().map(|v| v / alpha).collect(),
    )
}

/// Rescales `(g_hat, c_hat)` to `(alpha g_hat, c_hat / alpha)` with
/// `|alpha| = 1 / ||g_hat||`. The sign makes the result positively correlated
/// with `reference`; when the two are orthogonal it falls back to matching the
/// sign of the first entry of the result with magnitude above `1e-9`.
pub fn align_scale(
    g_hat: &[f64],
    c_hat: &[f64],
    reference: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len("align_scale (reference)", g_hat.len(), reference.len())?;
    let alpha = unit_scale(g_hat)?;
    let corr: f64 = g_hat.iter().zip(reference).map(|(a, b)| a * b).sum();
    let flip = if corr != 0.0 {
        corr < 0.0
    } else {
        match g_hat
            .iter()
            .position(|v| (v * alpha).abs() > SIGN_THRESHOLD)
        {
            Some(i) => (g_hat[i] > 0.0) != (reference[i] >= 0.0),
            None => false,
        }
    };
    Ok(rescale(g_hat, c_hat, if flip { -alpha } else { alpha }))
}

/// Reference-free normalization used for reporting estimates: unit norm and a
/// positive leading significant entry.
pub fn normalize_estimate(g_hat: &[f64], c_hat: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let alpha = unit_scale(g_hat)?;
    let flip = g_hat
        .iter()
        .find(|v| (*v * alpha).abs() > SIGN_THRESHOLD)
        .is_some_and(|&v| v < 0.0);
    Ok(rescale(g_hat, c_hat, if flip { -alpha } else { alpha }))
}

/// `1 - ||truth - estimate|| / ||truth - mean(truth)||`.
pub fn fit_score(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    check_len("fit score", truth.len(), estimate.len())?;
    if truth.is_empty() {
        return Err(KbhError::InvalidParameter(
            "fit score of empty vectors".into(),
        ));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let spread = truth
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        .sqrt();
    if !(spread > 0.0) {
        return Err(KbhError::InvalidParameter(
            "fit score undefined: reference is constant".into(),
        ));
    }
    let err = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(1.0 - err / spread)
}

/// Impulse-response fit. Alignment must already be applied.
pub fn fit_g(g_true: &[f64], g_hat: &[f64]) -> Result<f64> {
    fit_score(g_true, g_hat)
}

/// Nonlinearity fit, with both nonlinearities evaluated on the run's own
/// input samples `u`. Alignment must already be applied.
pub fn fit_f(c_true: &[f64], c_hat: &[f64], basis: &dyn BasisSet, u: &[f64]) -> Result<f64> {
    let f_true = apply_nonlinearity(basis, &NonlinearityCoefficients::new(c_true.to_vec())?, u)?;
    let f_hat = apply_nonlinearity(basis, &NonlinearityCoefficients::new(c_hat.to_vec())?, u)?;
    fit_score(&f_true, &f_hat)
}

/// Aligns an estimate against the truth and returns `(fit_g, fit_f)`.
pub fn score_estimate(
    g_true: &[f64],
    c_true: &[f64],
    g_hat: &[f64],
    c_hat: &[f64],
    basis: &dyn BasisSet,
    u: &[f64],
) -> Result<(f64, f64)> {
    let (g, c) = align_scale(g_hat, c_hat, g_true)?;
    Ok((fit_g(g_true, &g)?, fit_f(c_true, &c, basis, u)?))
}
