//! Over-parameterization baseline: ridge least squares on the bilinear
//! parameter matrix `Theta = g c^T`, then a rank-1 factorization.
//!
//! This is a different comparator from a prediction-error method with known
//! model order; reports label it "baseline".

use nalgebra::{DMatrix, DVector};

use crate::basis::{regressor_columns, BasisSet};
use crate::error::{KbhError, Result};
use crate::metrics::normalize_estimate;
use crate::signal::SignalRecord;
use crate::toeplitz::{convolve_truncated, correlate, cross_gram};

/// Ridge weight relative to the mean diagonal of the normal matrix.
pub const RIDGE_RELATIVE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearEstimate {
    /// `n x p` least-squares estimate of `g c^T`.
    pub theta: DMatrix<f64>,
    pub g_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
    /// `||y - Phi vec(Theta)||`.
    pub residual_norm: f64,
}

/// Dominant singular triple of `theta` as `(s u, v)`, normalized to a unit
/// norm impulse response with a positive leading significant entry.
pub fn rank_one_factors(theta: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let svd = theta.clone().svd(true, true);
    let (idx, &s) = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| KbhError::Numerical("empty parameter matrix".into()))?;
    if !(s > 0.0) {
        return Err(KbhError::Numerical(
            "parameter matrix is zero; no rank-1 factor".into(),
        ));
    }
    let u = svd.u.as_ref().expect("requested U").column(idx) * s;
    let v = svd
        .v_t
        .as_ref()
        .expect("requested V^T")
        .row(idx)
        .transpose();
    normalize_estimate(u.as_slice(), v.as_slice())
}

/// Fits the bilinear model `y_t = sum_{k,a} Theta[k][a] phi_a(u_{t-k})`.
pub fn baseline_fit(
    data: &SignalRecord,
    basis: &dyn BasisSet,
    n: usize,
) -> Result<BilinearEstimate> {
    if n == 0 || n > data.len() {
        return Err(KbhError::InvalidParameter(format!(
            "impulse-response length must satisfy 1 <= n <= N, got n = {n}, N = {}",
            data.len()
        )));
    }
    let columns = regressor_columns(basis, data.u())?;
    let p = columns.len();
    let dim = n * p;
    let mut normal = DMatrix::zeros(dim, dim);
    for a in 0..p {
        for b in a..p {
            let g = cross_gram(&columns[a], &columns[b], n);
            normal.view_mut((a * n, b * n), (n, n)).copy_from(&g);
            if a != b {
                normal
                    .view_mut((b * n, a * n), (n, n))
                    .copy_from(&g.transpose());
            }
        }
    }
    let mut rhs = DVector::zeros(dim);
    for (a, col) in columns.iter().enumerate() {
        rhs.rows_mut(a * n, n)
            .copy_from(&DVector::from_vec(correlate(col, data.y(), n)));
    }
    let mean_diag = normal.trace() / dim as f64;
    if !(mean_diag > 0.0) || rhs.amax() == 0.0 {
        return Err(KbhError::InvalidParameter(
            "baseline needs nonzero regressors and output".into(),
        ));
    }
    let ridge = RIDGE_RELATIVE * mean_diag;
    for i in 0..dim {
        normal[(i, i)] += ridge;
    }
    let solution = normal
        .cholesky()
        .ok_or_else(|| {
            KbhError::Numerical("ridge normal equations are not positive definite".into())
        })?
        .solve(&rhs);
    let theta = DMatrix::from_column_slice(n, p, solution.as_slice());

    let mut fitted = vec![0.0; data.len()];
    for (a, col) in columns.iter().enumerate() {
        let part = convolve_truncated(col, theta.column(a).as_slice());
        fitted.iter_mut().zip(part).for_each(|(f, v)| *f += v);
    }
    let residual_norm = data
        .y()
        .iter()
        .zip(&fitted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let (g_hat, c_hat) = rank_one_factors(&theta)?;
    Ok(BilinearEstimate {
        theta,
        g_hat,
        c_hat,
        residual_norm,
    })
}
