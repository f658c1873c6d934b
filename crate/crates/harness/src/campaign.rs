//! Monte Carlo campaigns: every experiment of a [`CampaignConfig`] is run
//! `runs` times with both estimators. Run `r` uses seed `seed + r`, so the
//! outputs do not depend on the degree of parallelism.

use std::path::Path;
use std::time::Instant;

use kbh_core::datagen::ExperimentConfig;
use kbh_core::metrics::score_estimate;
use kbh_core::PolynomialBasis;
use rayon::prelude::*;

use crate::config::CampaignConfig;
use crate::error::{HarnessError, Result};
use crate::identify::{estimate, Estimator, IdentifyOptions};
use crate::stats::{aggregate, aggregate_record, ScoreRow, AGGREGATE_HEADER};
use crate::table::{num, opt_num, write_csv};

/// Share of failed estimator runs above which a campaign fails.
pub const MAX_FAILURE_RATE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub experiment: usize,
    pub nu: usize,
    pub snr: f64,
    pub run: usize,
    pub seed: u64,
    pub estimator: Estimator,
    pub fit_g: Option<f64>,
    pub fit_f: Option<f64>,
    pub iterations: usize,
    pub error: Option<String>,
    pub seconds: f64,
    pub g_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
}

impl RunRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    pub fn scores(&self) -> ScoreRow {
        ScoreRow {
            experiment: self.experiment,
            nu: self.nu,
            snr: self.snr,
            estimator: self.estimator,
            fit_g: self.fit_g,
            fit_f: self.fit_f,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub experiment: usize,
    pub run: usize,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub config: CampaignConfig,
    /// Sorted by experiment, run, then estimator.
    pub rows: Vec<RunRow>,
    pub truths: Vec<TruthRecord>,
}

impl CampaignResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    /// Fails when more than 10% of the estimator runs failed.
    pub fn check_failure_rate(&self) -> Result<()> {
        let failed = self.failures();
        let total = self.rows.len();
        if total > 0 && failed as f64 > MAX_FAILURE_RATE * total as f64 {
            Err(HarnessError::FailureRate { failed, total })
        } else {
            Ok(())
        }
    }
}

/// Runs the campaign on a pool of `parallelism` threads (0 picks the
/// number of available cores).
pub fn run_campaign(config: &CampaignConfig, parallelism: usize) -> Result<CampaignResult> {
    config.validate()?;
    let experiments = config.experiments();
    let tasks: Vec<(usize, usize)> = (0..experiments.len())
        .flat_map(|e| (0..config.runs).map(move |r| (e, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| HarnessError::Usage(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<(Vec<RunRow>, Option<TruthRecord>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(e, r)| run_one(config, &experiments[e], e, r))
            .collect()
    });
    let mut rows = Vec::with_capacity(outcomes.len() * 2);
    let mut truths = Vec::with_capacity(outcomes.len());
    for (r, t) in outcomes {
        rows.extend(r);
        truths.extend(t);
    }
    Ok(CampaignResult {
        config: config.clone(),
        rows,
        truths,
    })
}

fn run_one(
    config: &CampaignConfig,
    exp: &ExperimentConfig,
    experiment: usize,
    run: usize,
) -> (Vec<RunRow>, Option<TruthRecord>) {
    let seed = config.seed.wrapping_add(run as u64);
    let blank = |estimator, error: String| RunRow {
        experiment,
        nu: exp.nu,
        snr: exp.snr,
        run,
        seed,
        estimator,
        fit_g: None,
        fit_f: None,
        iterations: 0,
        error: Some(error),
        seconds: 0.0,
        g_hat: Vec::new(),
        c_hat: Vec::new(),
    };
    let generated = match exp.generate(seed) {
        Ok(g) => g,
        Err(e) => {
            let msg = format!("data generation: {e}");
            return (
                Estimator::ALL
                    .iter()
                    .map(|&est| blank(est, msg.clone()))
                    .collect(),
                None,
            );
        }
    };
    let data = &generated.data;
    let basis = PolynomialBasis::new(exp.p).expect("validated basis dimension");
    let rows = Estimator::ALL
        .iter()
        .map(|&estimator| {
            let opts = IdentifyOptions {
                estimator,
                n: exp.n,
                p: exp.p,
                tol: config.tol,
                max_iter: config.max_iter,
                seed,
            };
            let start = Instant::now();
            let result = estimate(&data.record, &opts).and_then(|est| {
                let (fit_g, fit_f) = score_estimate(
                    &data.truth.g,
                    &data.truth.c,
                    &est.g_hat,
                    &est.c_hat,
                    &basis,
                    data.record.u(),
                )?;
                Ok((est, fit_g, fit_f))
            });
            let seconds = start.elapsed().as_secs_f64();
            match result {
                Ok((est, fit_g, fit_f)) => RunRow {
                    fit_g: Some(fit_g),
                    fit_f: Some(fit_f),
                    iterations: est.iterations,
                    error: None,
                    seconds,
                    g_hat: est.g_hat,
                    c_hat: est.c_hat,
                    ..blank(estimator, String::new())
                },
                Err(e) => RunRow {
                    seconds,
                    ..blank(estimator, e.to_string())
                },
            }
        })
        .collect();
    let truth = TruthRecord {
        experiment,
        run,
        g: data.truth.g.clone(),
        c: data.truth.c.clone(),
    };
    (rows, Some(truth))
}

pub const RUNS_HEADER: [&str; 11] = [
    "experiment",
    "nu",
    "snr",
    "run",
    "seed",
    "estimator",
    "fit_g",
    "fit_f",
    "iterations",
    "failed",
    "error",
];
pub const TIMINGS_HEADER: [&str; 4] = ["experiment", "run", "estimator", "seconds"];
pub const ESTIMATES_HEADER: [&str; 6] =
    ["experiment", "run", "estimator", "kind", "index", "value"];
pub const TRUTH_HEADER: [&str; 5] = ["experiment", "run", "kind", "index", "value"];

pub const CONFIG_FILE: &str = "config.txt";
pub const RUNS_FILE: &str = "runs.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const TRUTH_FILE: &str = "truth.csv";

/// Writes every campaign file into `dir`. All files except `timings.csv`
/// are a pure function of the configuration.
pub fn write_campaign(result: &CampaignResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let config_path = dir.join(CONFIG_FILE);
    std::fs::write(&config_path, result.config.to_text())
        .map_err(|e| HarnessError::io(&config_path, e))?;
    write_csv(
        &dir.join(RUNS_FILE),
        &RUNS_HEADER,
        result.rows.iter().map(|r| {
            vec![
                r.experiment.to_string(),
                r.nu.to_string(),
                num(r.snr),
                r.run.to_string(),
                r.seed.to_string(),
                r.estimator.as_str().to_string(),
                opt_num(r.fit_g),
                opt_num(r.fit_f),
                r.iterations.to_string(),
                (r.failed() as u8).to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )?;
    write_csv(
        &dir.join(TIMINGS_FILE),
        &TIMINGS_HEADER,
        result.rows.iter().map(|r| {
            vec![
                r.experiment.to_string(),
                r.run.to_string(),
                r.estimator.as_str().to_string(),
                num(r.seconds),
            ]
        }),
    )?;
    let scores: Vec<ScoreRow> = result.rows.iter().map(RunRow::scores).collect();
    write_csv(
        &dir.join(AGGREGATE_FILE),
        &AGGREGATE_HEADER,
        aggregate(&scores).iter().map(aggregate_record),
    )?;
    write_csv(
        &dir.join(ESTIMATES_FILE),
        &ESTIMATES_HEADER,
        result.rows.iter().flat_map(|r| {
            let prefix = [
                r.experiment.to_string(),
                r.run.to_string(),
                r.estimator.as_str().to_string(),
            ];
            let mut rows = vector_rows(&prefix, "g", &r.g_hat);
            rows.extend(vector_rows(&prefix, "c", &r.c_hat));
            rows
        }),
    )?;
    write_csv(
        &dir.join(TRUTH_FILE),
        &TRUTH_HEADER,
        result.truths.iter().flat_map(|t| {
            let prefix = [t.experiment.to_string(), t.run.to_string()];
            let mut rows = vector_rows(&prefix, "g", &t.g);
            rows.extend(vector_rows(&prefix, "c", &t.c));
            rows
        }),
    )
}

fn vector_rows(prefix: &[String], kind: &str, values: &[f64]) -> Vec<Vec<String>> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut row = prefix.to_vec();
            row.extend([kind.to_string(), i.to_string(), num(*v)]);
            row
        })
        .collect()
}
