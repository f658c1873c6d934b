//! Kernel-based identification of Hammerstein systems.
//!
//! The linear block's impulse response gets a zero-mean Gaussian prior with a
//! first-order stable-spline covariance; the static nonlinearity is a linear
//! combination of known basis functions. Nonlinearity coefficients, noise
//! variance and the kernel shaping parameter are fitted by maximizing the
//! marginal likelihood with EM ([`em_fit`]), after which the impulse
//! response is the posterior mean.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod basis;
pub mod datagen;
pub mod em;
pub mod error;
pub mod kernel;
pub mod metrics;
pub mod posterior;
pub mod signal;
pub mod toeplitz;

pub use baseline::{baseline_fit, BilinearEstimate};
pub use basis::{
    apply_nonlinearity, build_regressor, BasisSet, NonlinearityCoefficients, PolynomialBasis,
};
pub use em::{em_fit, EmConfig, EmTrace, HammersteinEstimate, InitStrategy, TerminationReason};
pub use error::{KbhError, Result};
pub use kernel::StableSplineKernel;
pub use posterior::{marginal_neg_loglik, posterior_moments, HyperParameters, PosteriorMoments};
pub use signal::SignalRecord;
pub use toeplitz::{commuted_toeplitz_apply, ToeplitzSpec};
