//! Single-dataset identification and its output files.

use std::path::Path;
use std::str::FromStr;

use kbh_core::metrics::normalize_estimate;
use kbh_core::{baseline_fit, em_fit, EmConfig, PolynomialBasis, SignalRecord, TerminationReason};

use crate::error::{HarnessError, Result};
use crate::table::{num, write_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Estimator {
    Kbh,
    Baseline,
}

impl Estimator {
    pub const ALL: [Estimator; 2] = [Estimator::Kbh, Estimator::Baseline];

    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Kbh => "kbh",
            Estimator::Baseline => "baseline",
        }
    }
}

impl FromStr for Estimator {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kbh" => Ok(Estimator::Kbh),
            "baseline" => Ok(Estimator::Baseline),
            other => Err(HarnessError::Usage(format!(
                "unknown estimator `{other}` (expected kbh or baseline)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyOptions {
    pub estimator: Estimator,
    pub n: usize,
    /// Basis dimension (polynomial degree + 1).
    pub p: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub neg_loglik: f64,
    pub q_value: f64,
    pub sigma2_clamped: bool,
}

/// Estimator output in a schema shared by both estimators. `g_hat`/`c_hat`
/// are the unit-norm representative with a positive leading entry; `theta`
/// holds the raw fitted parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub estimator: Estimator,
    pub g_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub theta: Vec<(String, f64)>,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    pub termination: Option<TerminationReason>,
}

pub fn estimate(record: &SignalRecord, opts: &IdentifyOptions) -> Result<Estimate> {
    let basis = PolynomialBasis::new(opts.p)?;
    match opts.estimator {
        Estimator::Kbh => {
            let config = EmConfig {
                tol: opts.tol,
                max_iter: opts.max_iter,
                rng_seed: opts.seed,
                ..EmConfig::default()
            };
            let est = em_fit(record, &basis, opts.n, &config)?;
            let (g_hat, c_hat) = normalize_estimate(&est.g_hat, &est.c_hat)?;
            let theta = coefficient_names(&est.c_hat)
                .chain([
                    ("sigma2".to_string(), est.theta_hat.sigma2),
                    ("beta".to_string(), est.theta_hat.beta),
                ])
                .collect();
            let trace = est
                .trace
                .records
                .iter()
                .map(|r| TraceRow {
                    iteration: r.iteration,
                    neg_loglik: r.neg_loglik,
                    q_value: r.q_value,
                    sigma2_clamped: r.sigma2_clamped,
                })
                .collect();
            Ok(Estimate {
                estimator: opts.estimator,
                g_hat,
                c_hat,
                theta,
                trace,
                iterations: est.trace.iterations(),
                termination: Some(est.trace.termination),
            })
        }
        Estimator::Baseline => {
            let est = baseline_fit(record, &basis, opts.n)?;
            let sigma2 = est.residual_norm * est.residual_norm / record.len() as f64;
            let theta = coefficient_names(&est.c_hat)
                .chain([("sigma2".to_string(), sigma2)])
                .collect();
            Ok(Estimate {
                estimator: opts.estimator,
                g_hat: est.g_hat,
                c_hat: est.c_hat,
                theta,
                trace: Vec::new(),
                iterations: 0,
                termination: None,
            })
        }
    }
}

fn coefficient_names(c: &[f64]) -> impl Iterator<Item = (String, f64)> + '_ {
    c.iter()
        .enumerate()
        .map(|(i, v)| (format!("c{}", i + 1), *v))
}

pub const VECTOR_HEADER: [&str; 2] = ["index", "value"];
pub const THETA_HEADER: [&str; 2] = ["name", "value"];
pub const TRACE_HEADER: [&str; 4] = ["iteration", "neg_loglik", "q_value", "sigma2_clamped"];

/// Writes `g_hat.csv`, `c_hat.csv`, `theta.csv` and `trace.csv` into `dir`.
pub fn write_estimate(est: &Estimate, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let vector = |v: &[f64]| -> Vec<Vec<String>> {
        v.iter()
            .enumerate()
            .map(|(i, x)| vec![i.to_string(), num(*x)])
            .collect()
    };
    write_csv(&dir.join("g_hat.csv"), &VECTOR_HEADER, vector(&est.g_hat))?;
    write_csv(&dir.join("c_hat.csv"), &VECTOR_HEADER, vector(&est.c_hat))?;
    write_csv(
        &dir.join("theta.csv"),
        &THETA_HEADER,
        est.theta.iter().map(|(k, v)| vec![k.clone(), num(*v)]),
    )?;
    write_csv(
        &dir.join("trace.csv"),
        &TRACE_HEADER,
        est.trace.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                num(r.neg_loglik),
                num(r.q_value),
                (r.sigma2_clamped as u8).to_string(),
            ]
        }),
    )
}
