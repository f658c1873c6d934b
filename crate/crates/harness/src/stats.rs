//! Five-number summaries of campaign scores.

use crate::identify::Estimator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quartiles by linear interpolation between order statistics (the
/// `(n - 1) p` rule). `None` for an empty sample.
pub fn five_number(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    };
    Some(FiveNumber {
        min: v[0],
        q1: q(0.25),
        median: q(0.5),
        q3: q(0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    FitG,
    FitF,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::FitG, Metric::FitF];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::FitG => "fit_g",
            Metric::FitF => "fit_f",
        }
    }
}

/// The score columns of one run row, as needed for aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub experiment: usize,
    pub nu: usize,
    pub snr: f64,
    pub estimator: Estimator,
    pub fit_g: Option<f64>,
    pub fit_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub experiment: usize,
    pub nu: usize,
    pub snr: f64,
    pub estimator: Estimator,
    pub metric: Metric,
    pub count: usize,
    pub failed: usize,
    pub summary: Option<FiveNumber>,
}

pub const AGGREGATE_HEADER: [&str; 12] = [
    "experiment",
    "nu",
    "snr",
    "estimator",
    "metric",
    "count",
    "failed",
    "min",
    "q1",
    "median",
    "q3",
    "max",
];

/// One row per (experiment, estimator, metric), ordered by experiment, then
/// estimator, then metric. Runs without a score count as failed.
pub fn aggregate(rows: &[ScoreRow]) -> Vec<AggregateRow> {
    let mut experiments: Vec<(usize, usize, f64)> =
        rows.iter().map(|r| (r.experiment, r.nu, r.snr)).collect();
    experiments.sort_by_key(|e| e.0);
    experiments.dedup_by_key(|e| e.0);
    let mut out = Vec::new();
    for (experiment, nu, snr) in experiments {
        for estimator in Estimator::ALL {
            let group: Vec<&ScoreRow> = rows
                .iter()
                .filter(|r| r.experiment == experiment && r.estimator == estimator)
                .collect();
            if group.is_empty() {
                continue;
            }
            for metric in Metric::ALL {
                let values: Vec<f64> = group
                    .iter()
                    .filter_map(|r| match metric {
                        Metric::FitG => r.fit_g,
                        Metric::FitF => r.fit_f,
                    })
                    .collect();
                out.push(AggregateRow {
                    experiment,
                    nu,
                    snr,
                    estimator,
                    metric,
                    count: values.len(),
                    failed: group.len() - values.len(),
                    summary: five_number(&values),
                });
            }
        }
    }
    out
}

pub fn aggregate_record(a: &AggregateRow) -> Vec<String> {
    use crate::table::{num, opt_num};
    let s = a.summary;
    vec![
        a.experiment.to_string(),
        a.nu.to_string(),
        num(a.snr),
        a.estimator.as_str().to_string(),
        a.metric.as_str().to_string(),
        a.count.to_string(),
        a.failed.to_string(),
        opt_num(s.map(|s| s.min)),
        opt_num(s.map(|s| s.q1)),
        opt_num(s.map(|s| s.median)),
        opt_num(s.map(|s| s.q3)),
        opt_num(s.map(|s| s.max)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_by_interpolation() {
        let s = five_number(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max),
            (1.0, 1.75, 2.5, 3.25, 4.0)
        );
        let s = five_number(&[7.0]).unwrap();
        assert_eq!((s.min, s.median, s.max), (7.0, 7.0, 7.0));
        let s = five_number(&[5.0, 1.0, 3.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert!(five_number(&[]).is_none());
    }

    #[test]
    fn aggregation_counts_failures() {
        let row = |experiment, estimator, fit_g| ScoreRow {
            experiment,
            nu: 4,
            snr: 10.0,
            estimator,
            fit_g,
            fit_f: fit_g,
        };
        let rows = vec![
            row(1, Estimator::Baseline, Some(0.2)),
            row(0, Estimator::Kbh, Some(0.9)),
            row(0, Estimator::Kbh, None),
            row(0, Estimator::Kbh, Some(0.7)),
        ];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 4);
        assert_eq!(
            (agg[0].experiment, agg[0].estimator, agg[0].metric),
            (0, Estimator::Kbh, Metric::FitG)
        );
        assert_eq!((agg[0].count, agg[0].failed), (2, 1));
        assert_eq!(agg[0].summary.unwrap().median, 0.8);
        assert_eq!(agg[2].estimator, Estimator::Baseline);
    }
}
