//! Posterior moments of the impulse response and the marginal likelihood.
//!
//! With `K = L L^T` the prior factor, everything is evaluated in the
//! n-dimensional whitened space through
//! `B = I + L^T W^T W L / sigma2 = R R^T`:
//!
//! * `P = (W^T W / sigma2 + K^{-1})^{-1} = L B^{-1} L^T = X^T X`, `X = R^{-1} L^T`
//! * `m = P W^T y / sigma2`
//! * `log det Sigma_y = N log sigma2 + log det B` (determinant lemma)
//! * `y^T Sigma_y^{-1} y = ||y - W m||^2 / sigma2 + m^T K^{-1} m` (Woodbury)
//!
//! so no `N x N` matrix and no explicit inverse of `K` is ever formed.

use nalgebra::{DMatrix, DVector};

use crate::basis::{apply_nonlinearity, BasisSet, NonlinearityCoefficients};
use crate::error::{check_len, KbhError, Result};
use crate::kernel::StableSplineKernel;
use crate::signal::SignalRecord;
use crate::toeplitz::{convolve_truncated, ToeplitzSpec};

/// Decision variables `theta = [c, sigma2, beta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParameters {
    pub c: NonlinearityCoefficients,
    pub sigma2: f64,
    pub beta: f64,
}

impl HyperParameters {
    pub fn new(c: Vec<f64>, sigma2: f64, beta: f64) -> Result<Self> {
        let c = NonlinearityCoefficients::new(c)?;
        let theta = Self { c, sigma2, beta };
        theta.validate()?;
        Ok(theta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(KbhError::InvalidParameter(format!(
                "noise variance must be positive and finite, got {}",
                self.sigma2
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(KbhError::InvalidParameter(format!(
                "kernel shaping parameter must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if let Some(i) = self.c.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(KbhError::NonFinite(format!("c[{i}]")));
        }
        Ok(())
    }

    /// The flat vector `[c_1..c_p, sigma2, beta]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.c.as_slice().to_vec();
        v.push(self.sigma2);
        v.push(self.beta);
        v
    }

    /// Euclidean distance between two flat parameter vectors.
    pub fn distance(&self, other: &Self) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Gaussian posterior `g | y ~ N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMoments {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// `S` with `S S^T = cov + mean mean^T`.
    second_moment_factor: DMatrix<f64>,
}

impl PosteriorMoments {
    /// Wraps externally supplied moments. `cov` is symmetrized and its
    /// negative eigenvalues (round-off) are dropped from the factor.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        check_len("posterior covariance (rows)", n, cov.nrows())?;
        check_len("posterior covariance (cols)", n, cov.ncols())?;
        let cov = (&cov + cov.transpose()) * 0.5;
        let eig = cov.clone().symmetric_eigen();
        let mut factor = DMatrix::zeros(n, n + 1);
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let scale = lambda.max(0.0).sqrt();
            factor
                .column_mut(k)
                .copy_from(&(eig.eigenvectors.column(k) * scale));
        }
        factor.column_mut(n).copy_from(&mean);
        Ok(Self {
            mean,
            cov,
            second_moment_factor: factor,
        })
    }

    fn from_factor(mean: DVector<f64>, cov_root: DMatrix<f64>) -> Self {
        // cov_root is X with cov = X^T X
        let cov = cov_root.transpose() * &cov_root;
        let cov = (&cov + cov.transpose()) * 0.5;
        let n = mean.len();
        let mut factor = DMatrix::zeros(n, n + 1);
        factor.columns_mut(0, n).copy_from(&cov_root.transpose());
        factor.column_mut(n).copy_from(&mean);
        Self {
            mean,
            cov,
            second_moment_factor: factor,
        }
    }

    pub fn order(&self) -> usize {
        self.mean.len()
    }

    /// `M = cov + mean mean^T`, the posterior second moment of g.
    pub fn second_moment(&self) -> DMatrix<f64> {
        &self.cov + &self.mean * self.mean.transpose()
    }

    pub fn second_moment_factor(&self) -> &DMatrix<f64> {
        &self.second_moment_factor
    }

    /// Moments of `alpha * g`: `(alpha m, alpha^2 P)`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            mean: &self.mean * alpha,
            cov: &self.cov * (alpha * alpha),
            second_moment_factor: &self.second_moment_factor * alpha,
        }
    }
}

/// Sufficient statistics of the linear block for a fixed intermediate signal.
pub(crate) struct LinearStats<'a> {
    pub w: &'a [f64],
    pub y: &'a [f64],
    pub gram: DMatrix<f64>,
    pub wty: DVector<f64>,
}

pub(crate) struct Conditioned {
    pub moments: PosteriorMoments,
    pub neg_loglik: f64,
}

/// E-step core: posterior moments and the marginal negative log-likelihood
/// for one `(W, sigma2, K)` triple.
pub(crate) fn condition(
    stats: &LinearStats<'_>,
    sigma2: f64,
    kernel: &StableSplineKernel,
) -> Result<Conditioned> {
    let n = kernel.order();
    let rows = stats.y.len();
    let l = kernel.cholesky_factor();
    let lt = l.transpose();
    let mut b = &lt * &stats.gram * l / sigma2;
    for i in 0..n {
        b[(i, i)] += 1.0;
    }
    let b = (&b + b.transpose()) * 0.5;
    let chol = b.cholesky().ok_or_else(|| {
        KbhError::Numerical(format!(
            "posterior precision factorization failed (sigma2 = {sigma2}, beta = {})",
            kernel.beta()
        ))
    })?;
    let r = chol.l();
    let x = r
        .solve_lower_triangular(&lt)
        .ok_or_else(|| KbhError::Numerical("singular posterior factor".into()))?;
    let q = &x * &stats.wty / sigma2;
    let v = r
        .tr_solve_lower_triangular(&q)
        .ok_or_else(|| KbhError::Numerical("singular posterior factor".into()))?;
    let mean = l * &v;

    let fitted = convolve_truncated(stats.w, mean.as_slice());
    let residual: f64 = stats
        .y
        .iter()
        .zip(&fitted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let logdet_b = 2.0 * r.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let neg_loglik = rows as f64 * sigma2.ln() + logdet_b + residual / sigma2 + v.norm_squared();
    if !neg_loglik.is_finite() {
        return Err(KbhError::Numerical(format!(
            "marginal likelihood is not finite (sigma2 = {sigma2}, beta = {})",
            kernel.beta()
        )));
    }
    Ok(Conditioned {
        moments: PosteriorMoments::from_factor(mean, x),
        neg_loglik,
    })
}

pub(crate) fn linear_stats<'a>(w: &'a [f64], y: &'a [f64], n: usize) -> Result<LinearStats<'a>> {
    let spec = ToeplitzSpec::new(w.to_vec(), n)?;
    let gram = spec.gram();
    let wty = DVector::from_vec(spec.adjoint(y)?);
    Ok(LinearStats { w, y, gram, wty })
}

fn prepare(
    data: &SignalRecord,
    basis: &dyn BasisSet,
    theta: &HyperParameters,
    n: usize,
) -> Result<(Vec<f64>, StableSplineKernel)> {
    theta.validate()?;
    if n == 0 || n > data.len() {
        return Err(KbhError::InvalidParameter(format!(
            "impulse-response length must satisfy 1 <= n <= N, got n = {n}, N = {}",
            data.len()
        )));
    }
    let w = apply_nonlinearity(basis, &theta.c, data.u())?;
    let kernel = StableSplineKernel::new(theta.beta, n)?;
    Ok((w, kernel))
}

fn attach_theta(err: KbhError, theta: &HyperParameters) -> KbhError {
    match err {
        KbhError::Numerical(msg) => {
            KbhError::Numerical(format!("{msg}; theta = {:?}", theta.to_vec()))
        }
        other => other,
    }
}

/// Posterior mean and covariance of the impulse response given the data.
pub fn posterior_moments(
    data: &SignalRecord,
    basis: &dyn BasisSet,
    theta: &HyperParameters,
    n: usize,
) -> Result<PosteriorMoments> {
    let (w, kernel) = prepare(data, basis, theta, n)?;
    let stats = linear_stats(&w, data.y(), n)?;
    condition(&stats, theta.sigma2, &kernel)
        .map(|c| c.moments)
        .map_err(|e| attach_theta(e, theta))
}

/// `log det Sigma_y + y^T Sigma_y^{-1} y` with `Sigma_y = W K W^T + sigma2 I`.
pub fn marginal_neg_loglik(
    data: &SignalRecord,
    basis: &dyn BasisSet,
    theta: &HyperParameters,
    n: usize,
) -> Result<f64> {
    let (w, kernel) = prepare(data, basis, theta, n)?;
    let stats = linear_stats(&w, data.y(), n)?;
    condition(&stats, theta.sigma2, &kernel)
        .map(|c| c.neg_loglik)
        .map_err(|e| attach_theta(e, theta))
}
