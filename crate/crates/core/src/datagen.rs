//! Synthetic Hammerstein experiments: random stable rational LTI blocks,
//! random degree-6 polynomial nonlinearities, uniform white input and output
//! noise calibrated to a target SNR.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::basis::{apply_nonlinearity, BasisSet, NonlinearityCoefficients, PolynomialBasis};
use crate::error::{KbhError, Result};
use crate::signal::SignalRecord;
use crate::toeplitz::convolve_truncated;

/// Magnitude band for randomly drawn poles and zeros.
pub const ROOT_MIN_RADIUS: f64 = 0.4;
pub const ROOT_MAX_RADIUS: f64 = 0.93;
/// Input samples and polynomial roots are drawn from `[-INPUT_RANGE, INPUT_RANGE]`.
pub const INPUT_RANGE: f64 = 2.0;
const POLY_DEGREE: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub nu: usize,
    pub poles: Vec<Complex64>,
    pub zeros: Vec<Complex64>,
    /// Truncated impulse response, `g[k]` is the lag-`k+1` coefficient;
    /// unit norm with a positive first sample.
    pub g: Vec<f64>,
}

/// Draws `count` roots with magnitude in the radius band and phase in
/// `[0, pi]`, as conjugate pairs plus one real root of random sign when
/// `count` is odd.
fn draw_roots<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<Complex64> {
    let mut roots = Vec::with_capacity(count);
    for _ in 0..count / 2 {
        let r = rng.random_range(ROOT_MIN_RADIUS..=ROOT_MAX_RADIUS);
        let phase = rng.random_range(0.0..=std::f64::consts::PI);
        let z = Complex64::from_polar(r, phase);
        roots.push(z);
        roots.push(z.conj());
    }
    if count % 2 == 1 {
        let r = rng.random_range(ROOT_MIN_RADIUS..=ROOT_MAX_RADIUS);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        roots.push(Complex64::new(sign * r, 0.0));
    }
    roots
}

/// Coefficients of `prod_i (1 - r_i q^{-1})` in powers of `q^{-1}`; real
/// whenever the roots are closed under conjugation.
pub fn monic_reciprocal_poly(roots: &[Complex64]) -> Vec<f64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &a) in coeffs.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= r * a;
        }
        coeffs = next;
    }
    coeffs.into_iter().map(|c| c.re).collect()
}

/// First `len` samples of the impulse response of `num(q^{-1}) / den(q^{-1})`
/// by long division; `den[0]` must be 1.
pub fn long_division(num: &[f64], den: &[f64], len: usize) -> Vec<f64> {
    let mut h = vec![0.0; len];
    for k in 0..len {
        let mut v = num.get(k).copied().unwrap_or(0.0);
        for j in 1..den.len().min(k + 1) {
            v -= den[j] * h[k - j];
        }
        h[k] = v;
    }
    h
}

/// Impulse response of `q^{-1} prod (1 - z_i q^{-1}) / prod (1 - p_i q^{-1})`
/// over lags `1..=n`, normalized to unit norm (the leading sample is 1 before
/// normalization, hence positive).
pub fn impulse_response(poles: &[Complex64], zeros: &[Complex64], n: usize) -> Vec<f64> {
    let num = monic_reciprocal_poly(zeros);
    let den = monic_reciprocal_poly(poles);
    let mut g = long_division(&num, &den, n);
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    g.iter_mut().for_each(|v| *v /= norm);
    g
}

/// A random stable system of order `nu` with `n` impulse-response samples.
pub fn random_system<R: Rng + ?Sized>(nu: usize, n: usize, rng: &mut R) -> Result<SystemSpec> {
    if nu == 0 || n < nu {
        return Err(KbhError::InvalidParameter(format!(
            "random system needs 1 <= nu <= n, got nu = {nu}, n = {n}"
        )));
    }
    let poles = draw_roots(nu, rng);
    let zeros = draw_roots(nu, rng);
    let g = impulse_response(&poles, &zeros, n);
    Ok(SystemSpec {
        nu,
        poles,
        zeros,
        g,
    })
}

/// Monomial coefficients (ascending powers) of `sign * prod (x - r_i)`.
pub fn polynomial_from_roots(roots: &[f64], sign: f64) -> Vec<f64> {
    let mut c = vec![sign];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (i, &a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= r * a;
        }
        c = next;
    }
    c
}

/// Degree-6 polynomial with roots uniform in `[-2, 2]` and a random sign,
/// in the basis `phi_i(x) = x^(i-1)` (seven coefficients).
pub fn random_polynomial<R: Rng + ?Sized>(rng: &mut R) -> NonlinearityCoefficients {
    let roots: Vec<f64> = (0..POLY_DEGREE)
        .map(|_| rng.random_range(-INPUT_RANGE..=INPUT_RANGE))
        .collect();
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    NonlinearityCoefficients(polynomial_from_roots(&roots, sign))
}

/// Quantities known only to the data generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub sigma2: f64,
    /// Intermediate signal `w = f(u)`.
    pub w: Vec<f64>,
    /// Noiseless output `z = T_n(w) g`.
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub record: SignalRecord,
    pub truth: GroundTruth,
}

fn population_variance(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64
}

/// Simulates `samples` input/output pairs from null initial conditions.
/// The noise variance is the empirical variance of the noiseless output
/// divided by `snr`.
pub fn simulate<R: Rng + ?Sized>(
    system: &SystemSpec,
    c: &NonlinearityCoefficients,
    basis: &dyn BasisSet,
    samples: usize,
    snr: f64,
    rng: &mut R,
) -> Result<SimulatedData> {
    if !(snr > 0.0) {
        return Err(KbhError::InvalidParameter(format!(
            "SNR must be positive, got {snr}"
        )));
    }
    if samples < system.g.len() {
        return Err(KbhError::InvalidParameter(format!(
            "need at least n = {} samples, got {samples}",
            system.g.len()
        )));
    }
    let u: Vec<f64> = (0..samples)
        .map(|_| rng.random_range(-INPUT_RANGE..=INPUT_RANGE))
        .collect();
    let w = apply_nonlinearity(basis, c, &u)?;
    let z = convolve_truncated(&w, &system.g);
    let sigma2 = population_variance(&z) / snr;
    let sd = sigma2.sqrt();
    let y: Vec<f64> = z
        .iter()
        .map(|zt| {
            let e: f64 = StandardNormal.sample(rng);
            zt + sd * e
        })
        .collect();
    Ok(SimulatedData {
        record: SignalRecord::new(u, y)?,
        truth: GroundTruth {
            g: system.g.clone(),
            c: c.as_slice().to_vec(),
            sigma2,
            w,
            z,
        },
    })
}

/// One Monte Carlo experiment design.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub nu: usize,
    pub snr: f64,
    /// Number of input/output samples N.
    pub samples: usize,
    /// Impulse-response length n.
    pub n: usize,
    /// Basis dimension p (polynomial degree p - 1).
    pub p: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nu: 4,
            snr: 10.0,
            samples: 500,
            n: 100,
            p: 7,
            runs: 100,
            seed: 0,
        }
    }
}

/// The eight experiment designs (orders 4, 8, 10, 20 at SNR 10, then SNR 1).
pub fn standard_experiments() -> Vec<ExperimentConfig> {
    [10.0, 1.0]
        .into_iter()
        .flat_map(|snr| {
            [4, 8, 10, 20].into_iter().map(move |nu| ExperimentConfig {
                nu,
                snr,
                ..ExperimentConfig::default()
            })
        })
        .collect()
}

/// A fully generated Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedRun {
    pub seed: u64,
    pub system: SystemSpec,
    pub data: SimulatedData,
}

impl ExperimentConfig {
    /// Generates the run with the given seed. The nonlinearity is a random
    /// degree-6 polynomial; with `p > 7` the extra coefficients are zero.
    pub fn generate(&self, seed: u64) -> Result<GeneratedRun> {
        if self.p < POLY_DEGREE + 1 {
            return Err(KbhError::InvalidParameter(format!(
                "basis dimension p = {} cannot hold a degree-{POLY_DEGREE} polynomial",
                self.p
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let system = random_system(self.nu, self.n, &mut rng)?;
        let mut c = random_polynomial(&mut rng);
        c.0.resize(self.p, 0.0);
        let basis = PolynomialBasis::new(self.p)?;
        let data = simulate(&system, &c, &basis, self.samples, self.snr, &mut rng)?;
        Ok(GeneratedRun { seed, system, data })
    }
}
