//! Dense reference implementations. Everything here materializes full
//! matrices and uses generic factorizations, sharing no code with the
//! structured paths under test.
#![allow(dead_code)]

use kbh_core::{build_regressor, HyperParameters, PolynomialBasis, SignalRecord};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// `rows x cols` lower-triangular Toeplitz matrix with first column `source`
/// (zero-padded or truncated to `rows`).
pub fn dense_toeplitz(source: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |r, j| {
        if r >= j && r - j < source.len() {
            source[r - j]
        } else {
            0.0
        }
    })
}

/// The `(N n) x N` matrix `R` with `R u = vec(T_n(u))`, column-major vec.
pub fn devec_operator(rows: usize, n: usize) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(rows * n, rows);
    for j in 0..n {
        for i in j..rows {
            r[(j * rows + i, i - j)] = 1.0;
        }
    }
    r
}

pub fn tc_dense(beta: f64, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| beta.powi(i.max(j) as i32 + 1))
}

/// `A = F^T R^T (M kron I_N) R F`, `b = F^T T_N(m)^T y`.
pub fn dense_coefficient_system(
    data: &SignalRecord,
    basis: &PolynomialBasis,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    n: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let rows = data.len();
    let f = build_regressor(basis, data.u()).unwrap();
    let r = devec_operator(rows, n);
    let m = cov + mean * mean.transpose();
    let kron = m.kronecker(&DMatrix::<f64>::identity(rows, rows));
    let rf = &r * &f;
    let a = rf.transpose() * kron * &rf;
    let t = dense_toeplitz(mean.as_slice(), rows, rows);
    let y = DVector::from_column_slice(data.y());
    let b = f.transpose() * t.transpose() * y;
    (a, b)
}

pub struct JointGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub neg_loglik: f64,
}

/// Conditions the joint Gaussian of `(g, y)` directly:
/// `Sigma_y = W K W^T + sigma2 I`.
pub fn joint_gaussian(
    data: &SignalRecord,
    basis: &PolynomialBasis,
    theta: &HyperParameters,
    n: usize,
) -> JointGaussian {
    let rows = data.len();
    let w = signal(data, basis, theta.c.as_slice());
    let wm = dense_toeplitz(&w, rows, n);
    let k = tc_dense(theta.beta, n);
    let sigma_y = &wm * &k * wm.transpose() + DMatrix::identity(rows, rows) * theta.sigma2;
    let inv = sigma_y.clone().try_inverse().unwrap();
    let y = DVector::from_column_slice(data.y());
    let gain = &k * wm.transpose() * &inv;
    let mean = &gain * &y;
    let cov = &k - &gain * &wm * &k;
    let neg_loglik = sigma_y.determinant().ln() + (y.transpose() * &inv * &y)[0];
    JointGaussian {
        mean,
        cov,
        neg_loglik,
    }
}

pub fn signal(data: &SignalRecord, basis: &PolynomialBasis, c: &[f64]) -> Vec<f64> {
    let f = build_regressor(basis, data.u()).unwrap();
    (f * DVector::from_column_slice(c)).as_slice().to_vec()
}

/// Expected complete-data log-likelihood (constants dropped) together with
/// the sum of the magnitudes of its terms, used to make tolerances relative.
pub fn dense_q(
    data: &SignalRecord,
    basis: &PolynomialBasis,
    theta: &HyperParameters,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    n: usize,
) -> (f64, f64) {
    let rows = data.len();
    let w = signal(data, basis, theta.c.as_slice());
    let wm = dense_toeplitz(&w, rows, n);
    let y = DVector::from_column_slice(data.y());
    let resid = (&y - &wm * mean).norm_squared();
    let spread = (&wm * cov * wm.transpose()).trace();
    let k = tc_dense(theta.beta, n);
    let m = cov + mean * mean.transpose();
    let terms = [
        -0.5 * rows as f64 * theta.sigma2.ln(),
        -resid / (2.0 * theta.sigma2),
        -spread / (2.0 * theta.sigma2),
        -0.5 * k.determinant().ln(),
        -0.5 * (k.try_inverse().unwrap() * m).trace(),
    ];
    (terms.iter().sum(), terms.iter().map(|t| t.abs()).sum())
}

/// Random `(u, y)` pair from a small Hammerstein system with noise.
pub fn small_instance(
    seed: u64,
    rows: usize,
    n: usize,
    p: usize,
) -> (SignalRecord, PolynomialBasis) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = PolynomialBasis::new(p).unwrap();
    let u: Vec<f64> = (0..rows).map(|_| rng.random_range(-2.0..2.0)).collect();
    let c: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let g: Vec<f64> = (0..n)
        .map(|k| 0.7f64.powi(k as i32) * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let tmp = SignalRecord::new(u.clone(), vec![0.0; rows]).unwrap();
    let w = signal(&tmp, &basis, &c);
    let clean = dense_toeplitz(&w, rows, n) * DVector::from_column_slice(&g);
    let y = clean
        .iter()
        .map(|v| v + 0.3 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (SignalRecord::new(u, y).unwrap(), basis)
}

/// Hyperparameters drawn around a plausible operating point.
pub fn random_theta(seed: u64, p: usize) -> HyperParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let c = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    HyperParameters::new(c, rng.random_range(0.05..2.0), rng.random_range(0.2..0.95)).unwrap()
}

pub fn max_rel_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}
