//! Basis-function representation of the static input nonlinearity,
//! `f(x) = sum_i c_i phi_i(x)`.

use nalgebra::DMatrix;

use crate::error::{check_len, KbhError, Result};

/// A finite family of scalar basis functions `phi_1..phi_p`.
///
/// Implementations must be deterministic and hold no mutable state.
pub trait BasisSet: Send + Sync {
    /// Number of basis functions p.
    fn dim(&self) -> usize;

    /// Writes `[phi_1(x), ..., phi_p(x)]` into `out` (length p).
    fn evaluate_into(&self, x: f64, out: &mut [f64]);

    /// `phi_index(x)` with a 0-based `index`.
    fn evaluate(&self, index: usize, x: f64) -> f64 {
        let mut row = vec![0.0; self.dim()];
        self.evaluate_into(x, &mut row);
        row[index]
    }
}

/// Monomials `phi_i(x) = x^(i-1)`, `i = 1..p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolynomialBasis {
    dim: usize,
}

impl PolynomialBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(KbhError::InvalidParameter(
                "polynomial basis needs at least one term".into(),
            ));
        }
        Ok(Self { dim })
    }
}

impl BasisSet for PolynomialBasis {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate_into(&self, x: f64, out: &mut [f64]) {
        let mut power = 1.0;
        for slot in out.iter_mut().take(self.dim) {
            *slot = power;
            power *= x;
        }
    }

    fn evaluate(&self, index: usize, x: f64) -> f64 {
        x.powi(index as i32)
    }
}

/// Coefficient vector `c` of the nonlinearity in a given basis.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityCoefficients(pub Vec<f64>);

impl NonlinearityCoefficients {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if let Some(i) = c.iter().position(|v| !v.is_finite()) {
            return Err(KbhError::NonFinite(format!("c[{i}]")));
        }
        Ok(Self(c))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The `N x p` regression matrix `F(u)`; row t is `[phi_1(u_t), ..., phi_p(u_t)]`.
pub fn build_regressor(basis: &dyn BasisSet, u: &[f64]) -> Result<DMatrix<f64>> {
    if u.is_empty() {
        return Err(KbhError::InvalidParameter(
            "regressor needs at least one input sample".into(),
        ));
    }
    let p = basis.dim();
    let mut f = DMatrix::zeros(u.len(), p);
    let mut row = vec![0.0; p];
    for (t, &x) in u.iter().enumerate() {
        basis.evaluate_into(x, &mut row);
        for (i, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(KbhError::NonFiniteBasis {
                    sample: t,
                    index: i + 1,
                });
            }
            f[(t, i)] = v;
        }
    }
    Ok(f)
}

/// The intermediate signal `w = F(u) c`.
pub fn apply_nonlinearity(
    basis: &dyn BasisSet,
    c: &NonlinearityCoefficients,
    u: &[f64],
) -> Result<Vec<f64>> {
    check_len("apply_nonlinearity (coefficients)", basis.dim(), c.len())?;
    let mut row = vec![0.0; basis.dim()];
    u.iter()
        .enumerate()
        .map(|(t, &x)| {
            basis.evaluate_into(x, &mut row);
            let value: f64 = row.iter().zip(c.as_slice()).map(|(a, b)| a * b).sum();
            if value.is_finite() {
                Ok(value)
            } else {
                Err(KbhError::NonFinite(format!("f(u[{t}])")))
            }
        })
        .collect()
}

/// Columns of `F(u)` as owned vectors, one per basis function.
pub(crate) fn regressor_columns(basis: &dyn BasisSet, u: &[f64]) -> Result<Vec<Vec<f64>>> {
    let f = build_regressor(basis, u)?;
    Ok(f.column_iter().map(|c| c.as_slice().to_vec()).collect())
}
