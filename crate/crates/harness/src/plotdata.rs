//! Plot-ready data from a campaign directory: five-number boxplot summaries
//! and true-versus-estimated overlays of g and f for selected runs.

use std::collections::BTreeMap;
use std::path::Path;

use kbh_core::datagen::INPUT_RANGE;
use kbh_core::metrics::align_scale;
use kbh_core::{apply_nonlinearity, NonlinearityCoefficients, PolynomialBasis};

use crate::campaign::{
    CONFIG_FILE, ESTIMATES_FILE, ESTIMATES_HEADER, RUNS_FILE, RUNS_HEADER, TRUTH_FILE, TRUTH_HEADER,
};
use crate::config::CampaignConfig;
use crate::error::{HarnessError, Result};
use crate::identify::Estimator;
use crate::stats::{aggregate, aggregate_record, AggregateRow, ScoreRow, AGGREGATE_HEADER};
use crate::table::{num, write_csv, Table};

/// Number of points of the nonlinearity overlay grid on `[-2, 2]`.
pub const F_GRID_POINTS: usize = 200;

pub const BOXPLOT_FILE: &str = "boxplot.csv";
pub const OVERLAY_G_FILE: &str = "overlay_g.csv";
pub const OVERLAY_F_FILE: &str = "overlay_f.csv";
pub const OVERLAY_G_HEADER: [&str; 8] = [
    "experiment",
    "nu",
    "snr",
    "run",
    "estimator",
    "index",
    "g_true",
    "g_hat",
];
pub const OVERLAY_F_HEADER: [&str; 8] = [
    "experiment",
    "nu",
    "snr",
    "run",
    "estimator",
    "x",
    "f_true",
    "f_hat",
];

/// `F_GRID_POINTS` uniform points from `-2` to `2` inclusive.
pub fn f_grid() -> Vec<f64> {
    (0..F_GRID_POINTS)
        .map(|i| -INPUT_RANGE + 2.0 * INPUT_RANGE * i as f64 / (F_GRID_POINTS - 1) as f64)
        .collect()
}

type Key = (usize, usize);
type Vectors = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub boxplot: Vec<AggregateRow>,
    pub overlays: usize,
}

/// Reads the campaign in `campaign_dir` and writes the plot files into `out`.
/// Overlays are emitted for the runs listed in `overlay_runs` that exist
/// and did not fail.
pub fn plotdata(campaign_dir: &Path, out: &Path, overlay_runs: &[usize]) -> Result<PlotData> {
    let config = CampaignConfig::read(&campaign_dir.join(CONFIG_FILE))?;
    let runs = Table::read(&campaign_dir.join(RUNS_FILE))?;
    runs.expect_header(&RUNS_HEADER)?;
    let mut scores = Vec::with_capacity(runs.rows.len());
    let mut meta: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for row in &runs.rows {
        let s = ScoreRow {
            experiment: runs.parse_as(row, 0)?,
            nu: runs.parse_as(row, 1)?,
            snr: runs.f64(row, 2)?,
            estimator: runs
                .str(row, 5)
                .parse()
                .map_err(|e: HarnessError| runs.error(row, e.to_string()))?,
            fit_g: runs.opt_f64(row, 6)?,
            fit_f: runs.opt_f64(row, 7)?,
        };
        meta.insert(s.experiment, (s.nu, s.snr));
        scores.push(s);
    }
    let boxplot = aggregate(&scores);

    let truth = read_vectors(&campaign_dir.join(TRUTH_FILE), &TRUTH_HEADER, false)?;
    let estimates = read_vectors(&campaign_dir.join(ESTIMATES_FILE), &ESTIMATES_HEADER, true)?;
    let basis = PolynomialBasis::new(config.p)?;
    let grid = f_grid();
    let mut g_rows = Vec::new();
    let mut f_rows = Vec::new();
    let mut overlays = 0;
    for ((experiment, run, estimator), est) in &estimates {
        if !overlay_runs.contains(run) {
            continue;
        }
        let (Some(g_hat), Some(c_hat)) = (est.get("g"), est.get("c")) else {
            continue;
        };
        let Some(t) = truth.get(&(*experiment, *run, String::new())) else {
            continue;
        };
        let (Some(g_true), Some(c_true)) = (t.get("g"), t.get("c")) else {
            continue;
        };
        let (nu, snr) = meta.get(experiment).copied().unwrap_or((0, f64::NAN));
        let (g_al, c_al) = align_scale(g_hat, c_hat, g_true)?;
        let f_true = apply_nonlinearity(
            &basis,
            &NonlinearityCoefficients::new(c_true.clone())?,
            &grid,
        )?;
        let f_hat = apply_nonlinearity(&basis, &NonlinearityCoefficients::new(c_al)?, &grid)?;
        let prefix = [
            experiment.to_string(),
            nu.to_string(),
            num(snr),
            run.to_string(),
            estimator.clone(),
        ];
        for (i, (a, b)) in g_true.iter().zip(&g_al).enumerate() {
            let mut row = prefix.to_vec();
            row.extend([i.to_string(), num(*a), num(*b)]);
            g_rows.push(row);
        }
        for ((x, a), b) in grid.iter().zip(&f_true).zip(&f_hat) {
            let mut row = prefix.to_vec();
            row.extend([num(*x), num(*a), num(*b)]);
            f_rows.push(row);
        }
        overlays += 1;
    }

    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    write_csv(
        &out.join(BOXPLOT_FILE),
        &AGGREGATE_HEADER,
        boxplot.iter().map(aggregate_record),
    )?;
    write_csv(&out.join(OVERLAY_G_FILE), &OVERLAY_G_HEADER, g_rows)?;
    write_csv(&out.join(OVERLAY_F_FILE), &OVERLAY_F_HEADER, f_rows)?;
    Ok(PlotData { boxplot, overlays })
}

/// Groups `kind,index,value` rows by `(experiment, run, estimator)`; the
/// estimator is the empty string for truth files.
fn read_vectors(
    path: &Path,
    header: &[&str],
    with_estimator: bool,
) -> Result<BTreeMap<(usize, usize, String), Vectors>> {
    let table = Table::read(path)?;
    table.expect_header(header)?;
    let off = with_estimator as usize;
    let mut out: BTreeMap<(usize, usize, String), Vectors> = BTreeMap::new();
    for row in &table.rows {
        let key: Key = (table.parse_as(row, 0)?, table.parse_as(row, 1)?);
        let estimator = if with_estimator {
            table
                .str(row, 2)
                .parse::<Estimator>()
                .map_err(|e| table.error(row, e.to_string()))?;
            table.str(row, 2).to_string()
        } else {
            String::new()
        };
        let kind = table.str(row, 2 + off).to_string();
        let index: usize = table.parse_as(row, 3 + off)?;
        let value = table.f64(row, 4 + off)?;
        let v = out
            .entry((key.0, key.1, estimator))
            .or_default()
            .entry(kind)
            .or_default();
        if index != v.len() {
            return Err(table.error(row, format!("expected index {}, got {index}", v.len())));
        }
        v.push(value);
    }
    Ok(out)
}
