//! First-order stable-spline (TC) kernel `K[i][j] = beta^max(i,j)` with
//! 1-based indices and unit scale.
//!
//! The kernel is the covariance of a Gauss-Markov sequence
//! `g_1 ~ N(0, beta)`, `g_i = beta g_{i-1} + e_i`, `e_i ~ N(0, beta^i (1 - beta))`,
//! so its lower Cholesky factor is known in closed form,
//! `L[i][j] = beta^(i-j) sqrt(d_j)` with pivots `d_1 = beta`,
//! `d_j = beta^j (1 - beta)`, and `L^{-1}` is lower bidiagonal. Triangular
//! solves are then two-term recurrences and `log det K` is a sum of logs that
//! never underflows, even where the smallest eigenvalues of `K` do.

use nalgebra::DMatrix;

use crate::error::{check_len, KbhError, Result};

#[derive(Debug, Clone)]
pub struct StableSplineKernel {
    beta: f64,
    matrix: DMatrix<f64>,
    factor: DMatrix<f64>,
    log_pivots: Vec<f64>,
    inv_diag: Vec<f64>,
}

impl StableSplineKernel {
    /// Builds and factors the `n x n` kernel. Requires `0 < beta < 1`.
    pub fn new(beta: f64, n: usize) -> Result<Self> {
        check_domain(beta, n)?;
        let log_pivots = log_pivots(beta, n);
        let diag: Vec<f64> = log_pivots.iter().map(|l| (0.5 * l).exp()).collect();
        let inv_diag: Vec<f64> = log_pivots.iter().map(|l| (-0.5 * l).exp()).collect();
        if diag
            .iter()
            .chain(&inv_diag)
            .any(|d| *d == 0.0 || !d.is_finite())
        {
            return Err(KbhError::KernelFactorization { beta, n });
        }
        let mut factor = DMatrix::zeros(n, n);
        for j in 0..n {
            factor[(j, j)] = diag[j];
            for i in j + 1..n {
                factor[(i, j)] = beta * factor[(i - 1, j)];
            }
        }
        Ok(Self {
            beta,
            matrix: tc_matrix(beta, n),
            factor,
            log_pivots,
            inv_diag,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Lower Cholesky factor `L` with `K = L L^T`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `log det K`, the sum of the log pivots.
    pub fn logdet(&self) -> f64 {
        self.log_pivots.iter().sum()
    }

    /// `K^{-1} v` by forward and back substitution.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("kernel_solve", self.order(), v.len())?;
        let mut x = DMatrix::from_column_slice(v.len(), 1, v);
        self.forward_mut(&mut x);
        self.backward_mut(&mut x);
        Ok(x.as_slice().to_vec())
    }

    /// `Tr(K^{-1} M)` for symmetric `M`, computed as `Tr(L^{-1} M L^{-T})`
    /// with two triangular solves.
    pub fn inv_quadform(&self, m: &DMatrix<f64>) -> Result<f64> {
        let n = self.order();
        check_len("kernel_inv_quadform (rows)", n, m.nrows())?;
        check_len("kernel_inv_quadform (cols)", n, m.ncols())?;
        let mut half = m.clone();
        self.forward_mut(&mut half);
        let mut full = half.transpose();
        self.forward_mut(&mut full);
        Ok(full.trace())
    }

    /// `Tr(K^{-1} S S^T) = ||L^{-1} S||_F^2`; a sum of squares, so it stays
    /// non-negative however ill-conditioned the kernel is.
    pub fn inv_trace_factored(&self, s: &DMatrix<f64>) -> Result<f64> {
        check_len("kernel_inv_trace_factored", self.order(), s.nrows())?;
        Ok(whitened_norm_sq(self.beta, &self.inv_diag, s))
    }

    /// Overwrites `x` with `L^{-1} x`.
    fn forward_mut(&self, x: &mut DMatrix<f64>) {
        let n = x.nrows();
        for mut col in x.column_iter_mut() {
            for i in (1..n).rev() {
                col[i] = (col[i] - self.beta * col[i - 1]) * self.inv_diag[i];
            }
            col[0] *= self.inv_diag[0];
        }
    }

    /// Overwrites `x` with `L^{-T} x`.
    fn backward_mut(&self, x: &mut DMatrix<f64>) {
        let n = x.nrows();
        for mut col in x.column_iter_mut() {
            for i in 0..n {
                let next = if i + 1 < n {
                    self.beta * col[i + 1] * self.inv_diag[i + 1]
                } else {
                    0.0
                };
                col[i] = col[i] * self.inv_diag[i] - next;
            }
        }
    }
}

/// `log det K_beta + Tr(K_beta^{-1} S S^T)` for an `n`-row factor `S`,
/// without forming the kernel. Agrees with the same quantity assembled from
/// a [`StableSplineKernel`]; cheap enough to scan many `beta` values.
pub fn shaping_objective(beta: f64, s: &DMatrix<f64>) -> Result<f64> {
    let n = s.nrows();
    check_domain(beta, n)?;
    let log_pivots = log_pivots(beta, n);
    let inv_diag: Vec<f64> = log_pivots.iter().map(|l| (-0.5 * l).exp()).collect();
    let value = log_pivots.iter().sum::<f64>() + whitened_norm_sq(beta, &inv_diag, s);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(KbhError::KernelFactorization { beta, n })
    }
}

fn check_domain(beta: f64, n: usize) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(KbhError::InvalidParameter(format!(
            "kernel shaping parameter must lie in (0, 1), got {beta}"
        )));
    }
    if n == 0 {
        return Err(KbhError::InvalidParameter(
            "kernel order must be positive".into(),
        ));
    }
    Ok(())
}

/// `log d_j` for the pivots `d_1 = beta`, `d_j = beta^j (1 - beta)`.
fn log_pivots(beta: f64, n: usize) -> Vec<f64> {
    let lb = beta.ln();
    let l1b = (-beta).ln_1p();
    (0..n)
        .map(|j| {
            if j == 0 {
                lb
            } else {
                (j + 1) as f64 * lb + l1b
            }
        })
        .collect()
}

fn whitened_norm_sq(beta: f64, inv_diag: &[f64], s: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for col in s.column_iter() {
        let mut prev = 0.0;
        for (i, &v) in col.iter().enumerate() {
            let z = (v - beta * prev) * inv_diag[i];
            total += z * z;
            prev = v;
        }
    }
    total
}

/// Unfactored TC kernel matrix.
pub fn tc_matrix(beta: f64, n: usize) -> DMatrix<f64> {
    let powers: Vec<f64> = (1..=n as i32).map(|k| beta.powi(k)).collect();
    DMatrix::from_fn(n, n, |i, j| powers[i.max(j)])
}

/// Default shaping-parameter grid: `points` uniform values on `[0.01, 0.99]`.
pub fn uniform_beta_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..points)
            .map(|i| 0.01 + 0.98 * i as f64 / (points - 1) as f64)
            .collect(),
    }
}
