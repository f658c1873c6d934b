//! Lower-triangular banded Toeplitz (truncated convolution) operators.
//!
//! `ToeplitzSpec { source, band }` stands for the `N x n` matrix whose entry at
//! 0-based row `r`, column `j` is `source[r - j]` when `r >= j` and zero
//! otherwise. With `source = w` this is the regression matrix `W` of the output
//! equation `y = W g + e`; row `r` of `W g` is the output sample `y_{r+1}`.
//! Operators are applied in factored form; [`ToeplitzSpec::to_dense`] exists
//! for oracles and small-instance checks.

use nalgebra::DMatrix;

use crate::error::{check_len, KbhError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzSpec {
    source: Vec<f64>,
    band: usize,
}

impl ToeplitzSpec {
    pub fn new(source: Vec<f64>, band: usize) -> Result<Self> {
        if band == 0 {
            return Err(KbhError::InvalidParameter(
                "Toeplitz band width must be positive".into(),
            ));
        }
        if band > source.len() {
            return Err(KbhError::InvalidParameter(format!(
                "Toeplitz band width {band} exceeds source length {}",
                source.len()
            )));
        }
        Ok(Self { source, band })
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    /// Number of columns n.
    pub fn band(&self) -> usize {
        self.band
    }

    /// Number of rows N.
    pub fn rows(&self) -> usize {
        self.source.len()
    }

    /// `W v`: `(W v)[r] = sum_{j <= min(r, n-1)} v[j] * source[r - j]`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("toeplitz_matvec", self.band, v.len())?;
        Ok(convolve_truncated(&self.source, v))
    }

    /// `W^T r`: `(W^T r)[j] = sum_{t >= j} r[t] * source[t - j]`.
    pub fn adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("toeplitz_matvec_adjoint", self.rows(), r.len())?;
        Ok(correlate(&self.source, r, self.band))
    }

    /// `W^T W`, assembled in `O(N n + n^2)`.
    pub fn gram(&self) -> DMatrix<f64> {
        cross_gram(&self.source, &self.source, self.band)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let rows = self.rows();
        DMatrix::from_fn(rows, self.band, |r, j| {
            if r >= j {
                self.source[r - j]
            } else {
                0.0
            }
        })
    }
}

/// Truncated causal convolution of `source` (length N) with `taps`
/// (length n <= N), returned with length N.
pub(crate) fn convolve_truncated(source: &[f64], taps: &[f64]) -> Vec<f64> {
    let rows = source.len();
    let mut out = vec![0.0; rows];
    for (j, &tap) in taps.iter().enumerate() {
        if tap == 0.0 {
            continue;
        }
        for (o, &s) in out[j..].iter_mut().zip(source) {
            *o += tap * s;
        }
    }
    out
}

/// `T_n(source)^T r` for `source` and `r` of equal length.
pub(crate) fn correlate(source: &[f64], r: &[f64], band: usize) -> Vec<f64> {
    (0..band)
        .map(|j| r[j..].iter().zip(source).map(|(a, b)| a * b).sum())
        .collect()
}

/// Cross Gram matrix `T_n(a)^T T_n(b)` of two equal-length sources.
///
/// Entry `(i, j)` is `sum_{t >= max(i,j)} a[t-i] b[t-j]`; the first row and
/// column are lagged correlations and every other entry follows from
/// `G[i+1][j+1] = G[i][j] - a[N-1-i] * b[N-1-j]`.
pub fn cross_gram(a: &[f64], b: &[f64], band: usize) -> DMatrix<f64> {
    assert_eq!(
        a.len(),
        b.len(),
        "cross_gram sources must have equal length"
    );
    let rows = a.len();
    assert!(band <= rows, "cross_gram band exceeds source length");
    let mut g = DMatrix::zeros(band, band);
    for j in 0..band {
        // row 0: sum_{t >= j} a[t] b[t-j]
        g[(0, j)] = a[j..].iter().zip(b).map(|(x, y)| x * y).sum();
        // column 0: sum_{t >= i} a[t-i] b[t]
        g[(j, 0)] = b[j..].iter().zip(a).map(|(x, y)| x * y).sum();
    }
    for i in 0..band.saturating_sub(1) {
        for j in 0..band - 1 {
            g[(i + 1, j + 1)] = g[(i, j)] - a[rows - 1 - i] * b[rows - 1 - j];
        }
    }
    g
}

/// `T_N(a_padded) b`: the convolution of a length-n sequence `a` against a
/// length-N sequence `b`, with `a` zero-padded to length N.
///
/// Equals `ToeplitzSpec::new(b, n).matvec(a)` by commutativity of
/// convolution. A unit impulse `a = [1, 0, ...]` (unit gain at lag one)
/// returns `b` itself; in the output indexing of [`crate::SignalRecord`] that
/// is `b` delayed by one sample.
pub fn commuted_toeplitz_apply(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() > b.len() {
        return Err(KbhError::InvalidParameter(format!(
            "commuted Toeplitz apply needs n <= N, got n = {} and N = {}",
            a.len(),
            b.len()
        )));
    }
    let mut padded = a.to_vec();
    padded.resize(b.len(), 0.0);
    Ok(convolve_truncated(&padded, b))
}

/// `sum_ij A_ij B_ij`, i.e. `Tr(A^T B)`.
pub(crate) fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
