use crate::error::{KbhError, Result};

/// Paired input/output record of a Hammerstein experiment.
///
/// Storage is 0-based throughout the crate. `u[t]` holds the input sample
/// `u_t` for `t = 0..N-1`, while `y[t]` holds the output sample `y_{t+1}`:
/// the output at index `t` is driven by inputs strictly before `u_{t+1}`,
/// i.e. by `u_0..u_t`. Impulse-response vectors `g[k]` likewise hold the
/// lag-`(k+1)` coefficient `g_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    u: Vec<f64>,
    y: Vec<f64>,
}

impl SignalRecord {
    pub fn new(u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(KbhError::InvalidParameter(
                "signal record needs at least one sample".into(),
            ));
        }
        if u.len() != y.len() {
            return Err(KbhError::DimensionMismatch {
                context: "signal record (u vs y)",
                expected: u.len(),
                actual: y.len(),
            });
        }
        if let Some(t) = u.iter().position(|v| !v.is_finite()) {
            return Err(KbhError::NonFinite(format!("u[{t}]")));
        }
        if let Some(t) = y.iter().position(|v| !v.is_finite()) {
            return Err(KbhError::NonFinite(format!("y[{t}]")));
        }
        Ok(Self { u, y })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Number of samples N.
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}
