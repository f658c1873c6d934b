//! Empirical-Bayes hyperparameter estimation by Expectation-Maximization.
//!
//! Each iteration conditions on the current `theta = [c, sigma2, beta]`
//! (E-step) and then maximizes the expected complete-data log-likelihood
//!
//! ```text
//! Q = -N/2 log sigma2 - (y^T y + Tr(W^T W M) - 2 y^T W m) / (2 sigma2)
//!     - 1/2 log det K_beta - 1/2 Tr(K_beta^{-1} M),     M = P + m m^T
//! ```
//!
//! block-wise: `c` from a `p x p` linear system, `sigma2` in closed form
//! using the new `c`, and `beta` by scanning a grid (plus the previous value)
//! and, by default, refining inside the winning grid cell.
//!
//! The `beta` block is `-1/2 (log det K + Tr(K^{-1} M))`, so the update picks
//! the grid point that *minimizes* `log det K + Tr(K^{-1} M)`. Maximizing that
//! expression instead would drive EM away from the marginal-likelihood optimum;
//! the monotonicity tests catch exactly that sign error.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::{regressor_columns, BasisSet, NonlinearityCoefficients};
use crate::error::{check_len, KbhError, Result};
use crate::kernel::{shaping_objective, uniform_beta_grid, StableSplineKernel};
use crate::posterior::{condition, HyperParameters, LinearStats, PosteriorMoments};
use crate::signal::SignalRecord;
use crate::toeplitz::{convolve_truncated, correlate, cross_gram, frobenius_inner};

/// Lower bound on the noise variance kept by the M-step.
pub const SIGMA2_FLOOR: f64 = 1e-12;

/// Interval width at which the golden-section refinement of beta stops.
const REFINE_TOL: f64 = 1e-6;

/// Relative pivot below which the coefficient system counts as singular.
const SINGULAR_PIVOT: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    /// Random `c` rescaled so `||F(u) c|| = ||y||`, sample variance of `y`
    /// for `sigma2`, and `beta = 0.5`.
    RandomDefault,
    /// Start from the given hyperparameters.
    Supplied(HyperParameters),
}

/// How the shaping-parameter block of the M-step is maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaSearch {
    /// Best point of the grid (plus the previous iterate).
    Grid,
    /// Grid scan, then golden-section refinement inside the winning cell.
    /// The exact M-step often moves beta by far less than a grid cell; with
    /// the plain grid such moves round back to the previous value and beta
    /// freezes.
    GridRefined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    /// Threshold on `||theta_{k+1} - theta_k||_2`. The norm runs over the
    /// raw vector `[c, sigma2, beta]`, whose entries carry different units.
    pub tol: f64,
    pub max_iter: usize,
    /// Strictly increasing candidate values in (0, 1).
    pub beta_grid: Vec<f64>,
    pub beta_search: BetaSearch,
    pub rng_seed: u64,
    pub init: InitStrategy,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 200,
            beta_grid: uniform_beta_grid(99),
            beta_search: BetaSearch::GridRefined,
            rng_seed: 0,
            init: InitStrategy::RandomDefault,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(KbhError::InvalidParameter(format!(
                "EM tolerance must be positive, got {}",
                self.tol
            )));
        }
        validate_grid(&self.beta_grid)
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(KbhError::InvalidParameter("beta grid is empty".into()));
    }
    if grid.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
        return Err(KbhError::InvalidParameter(
            "beta grid points must lie in (0, 1)".into(),
        ));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(KbhError::InvalidParameter(
            "beta grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    MaxIterations,
}

impl TerminationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxIterations => "max-iterations",
        }
    }
}

/// State of the iteration after `iteration` M-steps.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub theta: HyperParameters,
    /// Marginal negative log-likelihood at `theta`.
    pub neg_loglik: f64,
    /// `Q(theta, theta)`: expected complete-data log-likelihood under the
    /// posterior computed at `theta` itself.
    pub q_value: f64,
    /// Whether the noise-variance update producing `theta` hit the floor.
    pub sigma2_clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace {
    pub records: Vec<IterationRecord>,
    pub termination: TerminationReason,
}

impl EmTrace {
    /// Number of completed M-steps.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Largest increase of the negative log-likelihood between consecutive
    /// records (non-positive for a monotone run).
    pub fn max_nll_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].neg_loglik - w[0].neg_loglik)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HammersteinEstimate {
    pub g_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub theta_hat: HyperParameters,
    pub trace: EmTrace,
}

/// Everything about the regressors that does not change across iterations:
/// the columns `x_a = F(u) e_a`, all cross Gram matrices
/// `Z_a^T Z_b` with `Z_a = T_n(x_a)`, and the correlations `Z_a^T y`.
pub(crate) struct RegressorCache<'a> {
    y: &'a [f64],
    columns: Vec<Vec<f64>>,
    grams: Vec<DMatrix<f64>>,
    cross_y: Vec<DVector<f64>>,
    n: usize,
}

impl<'a> RegressorCache<'a> {
    pub(crate) fn new(data: &'a SignalRecord, basis: &dyn BasisSet, n: usize) -> Result<Self> {
        if n == 0 || n > data.len() {
            return Err(KbhError::InvalidParameter(format!(
                "impulse-response length must satisfy 1 <= n <= N, got n = {n}, N = {}",
                data.len()
            )));
        }
        let columns = regressor_columns(basis, data.u())?;
        let p = columns.len();
        let mut grams = vec![DMatrix::zeros(0, 0); p * p];
        for a in 0..p {
            for b in a..p {
                let g = cross_gram(&columns[a], &columns[b], n);
                if a != b {
                    grams[b * p + a] = g.transpose();
                }
                grams[a * p + b] = g;
            }
        }
        let cross_y = columns
            .iter()
            .map(|col| DVector::from_vec(correlate(col, data.y(), n)))
            .collect();
        Ok(Self {
            y: data.y(),
            columns,
            grams,
            cross_y,
            n,
        })
    }

    fn p(&self) -> usize {
        self.columns.len()
    }

    fn gram(&self, a: usize, b: usize) -> &DMatrix<f64> {
        &self.grams[a * self.p() + b]
    }

    fn signal(&self, c: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.y.len()];
        for (col, &ca) in self.columns.iter().zip(c) {
            for (wt, x) in w.iter_mut().zip(col) {
                *wt += ca * x;
            }
        }
        w
    }

    fn stats<'s>(&self, c: &[f64], w: &'s [f64]) -> LinearStats<'s>
    where
        'a: 's,
    {
        let p = self.p();
        let mut gram = DMatrix::zeros(self.n, self.n);
        let mut wty = DVector::zeros(self.n);
        for a in 0..p {
            if c[a] == 0.0 {
                continue;
            }
            wty.axpy(c[a], &self.cross_y[a], 1.0);
            for b in 0..p {
                if c[b] != 0.0 {
                    gram += self.gram(a, b) * (c[a] * c[b]);
                }
            }
        }
        LinearStats {
            w,
            y: self.y,
            gram,
            wty,
        }
    }

    /// Quadratic-form data `(A, b)` of the coefficient block,
    /// `A_ab = Tr(Z_a^T Z_b M)` and `b_a = (Z_a m)^T y`.
    fn coefficient_system(&self, post: &PosteriorMoments) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.p();
        let second = post.second_moment();
        let mut a_mat = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let v = frobenius_inner(self.gram(a, b), &second);
                a_mat[(a, b)] = v;
                a_mat[(b, a)] = v;
            }
        }
        let b_vec = DVector::from_fn(p, |a, _| self.cross_y[a].dot(&post.mean));
        (a_mat, b_vec)
    }

    fn solve_coefficients(&self, post: &PosteriorMoments) -> Result<Vec<f64>> {
        check_len("posterior order", self.n, post.order())?;
        let (a_mat, b_vec) = self.coefficient_system(post);
        solve_spd(&a_mat, &b_vec)
    }

    fn noise_variance(
        &self,
        w_new: &[f64],
        c_new: &[f64],
        post: &PosteriorMoments,
    ) -> NoiseVarianceUpdate {
        let fitted = convolve_truncated(w_new, post.mean.as_slice());
        let residual: f64 = self
            .y
            .iter()
            .zip(&fitted)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let stats = self.stats(c_new, w_new);
        let spread = frobenius_inner(&stats.gram, &post.cov);
        NoiseVarianceUpdate::from_raw((residual + spread) / self.y.len() as f64)
    }
}

fn solve_spd(a_mat: &DMatrix<f64>, b_vec: &DVector<f64>) -> Result<Vec<f64>> {
    let scale = a_mat.diagonal().max();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(KbhError::SingularCoefficients(
            "second-moment weighted regressor Gram matrix is zero (degenerate posterior or regressors)"
                .into(),
        ));
    }
    let chol = a_mat.clone().cholesky().ok_or_else(|| {
        KbhError::SingularCoefficients(
            "regressor Gram matrix is not positive definite (rank-deficient basis columns)".into(),
        )
    })?;
    let min_pivot = chol.l_dirty().diagonal().min();
    if min_pivot * min_pivot < SINGULAR_PIVOT * scale {
        return Err(KbhError::SingularCoefficients(format!(
            "regressor Gram matrix is numerically rank-deficient (relative pivot {:.3e}); \
             the input does not excite every basis function",
            min_pivot * min_pivot / scale
        )));
    }
    Ok(chol.solve(b_vec).as_slice().to_vec())
}

/// Result of the closed-form noise-variance update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseVarianceUpdate {
    pub value: f64,
    /// True when the raw value fell below [`SIGMA2_FLOOR`].
    pub clamped: bool,
}

impl NoiseVarianceUpdate {
    fn from_raw(raw: f64) -> Self {
        if raw >= SIGMA2_FLOOR {
            Self {
                value: raw,
                clamped: false,
            }
        } else {
            Self {
                value: SIGMA2_FLOOR,
                clamped: true,
            }
        }
    }
}

/// Maximizer of the coefficient block `-1/2 c^T A c + b^T c` of the
/// expected complete-data log-likelihood.
pub fn mstep_coefficients(
    data: &SignalRecord,
    basis: &dyn BasisSet,
    post: &PosteriorMoments,
    n: usize,
) -> Result<NonlinearityCoefficients> {
    let cache = RegressorCache::new(data, basis, n)?;
    cache.solve_coefficients(post).map(NonlinearityCoefficients)
}

/// The `(A, b)` pair of the coefficient block, exposed for verification.
pub fn coefficient_system(
    data: &SignalRecord,
    basis: &dyn BasisSet,
    post: &PosteriorMoments,
    n: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let cache = RegressorCache::new(data, basis, n)?;
    check_len("posterior order", n, post.order())?;
    Ok(cache.coefficient_system(post))
}

/// `(||y - W m||^2 + Tr(W P W^T)) / N` with `W = T_n(w_new)`, floored at
/// [`SIGMA2_FLOOR`].
pub fn mstep_noise_variance(
    data: &SignalRecord,
    w_new: &[f64],
    post: &PosteriorMoments,
    n: usize,
) -> Result<NoiseVarianceUpdate> {
    check_len("mstep_noise_variance (signal)", data.len(), w_new.len())?;
    check_len("posterior order", n, post.order())?;
    let spec = crate::toeplitz::ToeplitzSpec::new(w_new.to_vec(), n)?;
    let fitted = spec.matvec(post.mean.as_slice())?;
    let residual: f64 = data
        .y()
        .iter()
        .zip(&fitted)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let spread = frobenius_inner(&spec.gram(), &post.cov);
    Ok(NoiseVarianceUpdate::from_raw(
        (residual + spread) / data.len() as f64,
    ))
}

/// `log det K_beta + Tr(K_beta^{-1} M)` for the posterior second moment M.
pub fn beta_objective(kernel: &StableSplineKernel, post: &PosteriorMoments) -> Result<f64> {
    check_len("beta objective (order)", kernel.order(), post.order())?;
    Ok(kernel.logdet() + kernel.inv_trace_factored(post.second_moment_factor())?)
}

/// Grid point minimizing [`beta_objective`]; ties go to the smaller beta.
pub fn mstep_beta(post: &PosteriorMoments, grid: &[f64]) -> Result<f64> {
    validate_grid(grid)?;
    search_beta(post, grid, None, BetaSearch::Grid)
}

/// [`mstep_beta`] followed by a golden-section refinement within one grid
/// cell of the winning point. Never returns a worse objective than the grid.
pub fn mstep_beta_refined(post: &PosteriorMoments, grid: &[f64]) -> Result<f64> {
    validate_grid(grid)?;
    search_beta(post, grid, None, BetaSearch::GridRefined)
}

/// `candidates` in any order; evaluated in ascending order so the strict
/// comparison breaks ties toward the smaller value.
fn argmin_beta(post: &PosteriorMoments, candidates: &[f64]) -> Result<(f64, f64)> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut best: Option<(f64, f64)> = None;
    for beta in sorted {
        let Ok(value) = shaping_objective(beta, post.second_moment_factor()) else {
            continue;
        };
        if best.is_none_or(|(_, v)| value < v) {
            best = Some((beta, value));
        }
    }
    best.ok_or_else(|| KbhError::Numerical("beta objective failed at every grid point".into()))
}

/// Golden-section search of the objective on `[center - half, center + half]`
/// (clipped to the open unit interval). Returns `center` unless a strictly
/// better point is found.
fn refine_beta(post: &PosteriorMoments, center: f64, center_value: f64, half: f64) -> f64 {
    let eval = |b: f64| -> f64 {
        shaping_objective(b, post.second_moment_factor()).unwrap_or(f64::INFINITY)
    };
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut lo = (center - half).max(REFINE_TOL);
    let mut hi = (center + half).min(1.0 - REFINE_TOL);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    while hi - lo > REFINE_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = eval(x2);
        }
    }
    let (x, f) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    if f < center_value {
        x
    } else {
        center
    }
}

fn search_beta(
    post: &PosteriorMoments,
    grid: &[f64],
    previous: Option<f64>,
    mode: BetaSearch,
) -> Result<f64> {
    let mut candidates = grid.to_vec();
    candidates.extend(previous);
    let (beta, value) = argmin_beta(post, &candidates)?;
    match mode {
        BetaSearch::Grid => Ok(beta),
        BetaSearch::GridRefined => Ok(refine_beta(post, beta, value, grid_spacing(grid, beta))),
    }
}

/// Distance from `beta` to the farther of its two grid neighbours.
fn grid_spacing(grid: &[f64], beta: f64) -> f64 {
    let below = grid.iter().rev().find(|&&g| g < beta).map(|g| beta - g);
    let above = grid.iter().find(|&&g| g > beta).map(|g| g - beta);
    below.into_iter().chain(above).fold(REFINE_TOL, f64::max)
}

/// Expected complete-data log-likelihood `Q(theta, theta_k)` where `post`
/// holds the moments computed at `theta_k`.
pub fn q_function(
    data: &SignalRecord,
    basis: &dyn BasisSet,
    theta: &HyperParameters,
    post: &PosteriorMoments,
    n: usize,
) -> Result<f64> {
    theta.validate()?;
    let cache = RegressorCache::new(data, basis, n)?;
    check_len("posterior order", n, post.order())?;
    let kernel = StableSplineKernel::new(theta.beta, n)?;
    q_value(&cache, theta, post, &kernel)
}

fn q_value(
    cache: &RegressorCache<'_>,
    theta: &HyperParameters,
    post: &PosteriorMoments,
    kernel: &StableSplineKernel,
) -> Result<f64> {
    check_len("coefficients", cache.p(), theta.c.len())?;
    let c = theta.c.as_slice();
    let w = cache.signal(c);
    let stats = cache.stats(c, &w);
    let rows = cache.y.len() as f64;
    let yy: f64 = cache.y.iter().map(|v| v * v).sum();
    let quad = frobenius_inner(&stats.gram, &post.second_moment());
    let cross = stats.wty.dot(&post.mean);
    let q1 = -0.5 * rows * theta.sigma2.ln() - (yy + quad - 2.0 * cross) / (2.0 * theta.sigma2);
    Ok(q1 - 0.5 * beta_objective(kernel, post)?)
}

fn initial_theta(cache: &RegressorCache<'_>, config: &EmConfig) -> Result<HyperParameters> {
    match &config.init {
        InitStrategy::Supplied(theta) => {
            theta.validate()?;
            check_len("initial coefficients", cache.p(), theta.c.len())?;
            Ok(theta.clone())
        }
        InitStrategy::RandomDefault => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let mut c: Vec<f64> = (0..cache.p())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let w_norm = norm(&cache.signal(&c));
            let y_norm = norm(cache.y);
            if w_norm > 0.0 && y_norm > 0.0 {
                let s = y_norm / w_norm;
                c.iter_mut().for_each(|v| *v *= s);
            }
            let rows = cache.y.len() as f64;
            let mean = cache.y.iter().sum::<f64>() / rows;
            let var = if cache.y.len() > 1 {
                cache.y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (rows - 1.0)
            } else {
                mean * mean
            };
            HyperParameters::new(c, var.max(SIGMA2_FLOOR), 0.5)
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs EM from the configured initialization until the parameter step
/// falls below `tol` or `max_iter` M-steps have been taken.
pub fn em_fit(
    data: &SignalRecord,
    basis: &dyn BasisSet,
    n: usize,
    config: &EmConfig,
) -> Result<HammersteinEstimate> {
    config.validate()?;
    let cache = RegressorCache::new(data, basis, n)?;
    let mut theta = initial_theta(&cache, config)?;
    let mut records = Vec::new();
    let mut clamped = false;
    let mut converged = false;
    let at = |iteration: usize| {
        move |e: KbhError| KbhError::Iteration {
            iteration,
            source: Box::new(e),
        }
    };

    loop {
        let k = records.len();
        let c = theta.c.as_slice().to_vec();
        let w = cache.signal(&c);
        let stats = cache.stats(&c, &w);
        let kernel = StableSplineKernel::new(theta.beta, n).map_err(at(k))?;
        let cond = condition(&stats, theta.sigma2, &kernel).map_err(at(k))?;
        let q = q_value(&cache, &theta, &cond.moments, &kernel).map_err(at(k))?;
        records.push(IterationRecord {
            iteration: k,
            theta: theta.clone(),
            neg_loglik: cond.neg_loglik,
            q_value: q,
            sigma2_clamped: clamped,
        });

        let termination = if converged {
            Some(TerminationReason::Converged)
        } else if k >= config.max_iter {
            Some(TerminationReason::MaxIterations)
        } else {
            None
        };
        if let Some(termination) = termination {
            return Ok(HammersteinEstimate {
                g_hat: cond.moments.mean.as_slice().to_vec(),
                c_hat: c,
                theta_hat: theta,
                trace: EmTrace {
                    records,
                    termination,
                },
            });
        }

        // M-step: c, then sigma2 with the new c, then beta.
        let post = &cond.moments;
        let c_new = cache.solve_coefficients(post).map_err(at(k))?;
        let w_new = cache.signal(&c_new);
        let noise = cache.noise_variance(&w_new, &c_new, post);
        let beta_new = search_beta(
            post,
            &config.beta_grid,
            Some(theta.beta),
            config.beta_search,
        )
        .map_err(at(k))?;

        let next = HyperParameters::new(c_new, noise.value, beta_new).map_err(at(k))?;
        converged = next.distance(&theta) < config.tol;
        clamped = noise.clamped;
        theta = next;
    }
}
