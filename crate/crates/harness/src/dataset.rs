//! Dataset files: a CSV with columns `u,y` behind a short `#` header
//! carrying `N` (row count) and optionally `n` (recommended impulse-response
//! length). Ground truth lives in a sibling `<stem>.truth.csv` that the
//! estimators never open.

use std::path::{Path, PathBuf};

use kbh_core::datagen::GroundTruth;
use kbh_core::SignalRecord;

use crate::error::{HarnessError, Result};
use crate::table::{comment_value, num, write_csv_with_comments, Table};

const DATASET_TAG: &str = "kbh dataset";
const TRUTH_TAG: &str = "kbh ground truth";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub record: SignalRecord,
    /// Recommended impulse-response length.
    pub n: Option<usize>,
}

impl DatasetFile {
    pub fn read(path: &Path) -> Result<Self> {
        let table = Table::read(path)?;
        table.expect_header(&["u", "y"])?;
        let mut u = Vec::with_capacity(table.rows.len());
        let mut y = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            u.push(table.f64(row, 0)?);
            y.push(table.f64(row, 1)?);
        }
        let header_usize = |key: &str| -> Result<Option<usize>> {
            comment_value(&table.comments, key)
                .map(|v| {
                    v.parse().map_err(|_| {
                        HarnessError::parse(
                            path,
                            1,
                            format!("header `{key}` must be a non-negative integer, got `{v}`"),
                        )
                    })
                })
                .transpose()
        };
        if let Some(rows) = header_usize("N")? {
            if rows != u.len() {
                return Err(HarnessError::parse(
                    path,
                    1,
                    format!("header declares N={rows} but the file has {} rows", u.len()),
                ));
            }
        }
        let n = header_usize("n")?;
        if u.is_empty() {
            return Err(HarnessError::parse(path, 1, "dataset has no rows"));
        }
        let record =
            SignalRecord::new(u, y).map_err(|e| HarnessError::parse(path, 1, e.to_string()))?;
        Ok(Self { record, n })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut comments = vec![DATASET_TAG.to_string(), format!("N={}", self.record.len())];
        comments.extend(self.n.map(|n| format!("n={n}")));
        let rows = self
            .record
            .u()
            .iter()
            .zip(self.record.y())
            .map(|(u, y)| vec![num(*u), num(*y)]);
        write_csv_with_comments(path, &comments, &["u", "y"], rows)
    }
}

/// `data.csv` -> `data.truth.csv`.
pub fn truth_path(dataset: &Path) -> PathBuf {
    let stem = dataset
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset");
    dataset.with_file_name(format!("{stem}.truth.csv"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthFile {
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub sigma2: f64,
}

impl From<&GroundTruth> for TruthFile {
    fn from(t: &GroundTruth) -> Self {
        Self {
            g: t.g.clone(),
            c: t.c.clone(),
            sigma2: t.sigma2,
        }
    }
}

impl TruthFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        let comments = [
            TRUTH_TAG.to_string(),
            format!("sigma2={}", num(self.sigma2)),
        ];
        let rows = self
            .g
            .iter()
            .enumerate()
            .map(|(i, v)| vec!["g".into(), i.to_string(), num(*v)])
            .chain(
                self.c
                    .iter()
                    .enumerate()
                    .map(|(i, v)| vec!["c".into(), i.to_string(), num(*v)]),
            );
        write_csv_with_comments(path, &comments, &["kind", "index", "value"], rows)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let table = Table::read(path)?;
        table.expect_header(&["kind", "index", "value"])?;
        let sigma2 = comment_value(&table.comments, "sigma2")
            .ok_or_else(|| HarnessError::parse(path, 1, "missing `sigma2` header"))?;
        let sigma2: f64 = sigma2
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| HarnessError::parse(path, 1, format!("invalid sigma2 `{sigma2}`")))?;
        let (mut g, mut c) = (Vec::new(), Vec::new());
        for row in &table.rows {
            let index: usize = table.parse_as(row, 1)?;
            let value = table.f64(row, 2)?;
            let target = match table.str(row, 0) {
                "g" => &mut g,
                "c" => &mut c,
                other => return Err(table.error(row, format!("unknown kind `{other}`"))),
            };
            if index != target.len() {
                return Err(
                    table.error(row, format!("expected index {}, got {index}", target.len()))
                );
            }
            target.push(value);
        }
        Ok(Self { g, c, sigma2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let u = vec![0.1, -1.0 / 3.0, 2.0, 1e-300, -0.0];
        let y = vec![std::f64::consts::PI, 5e-324, -7.25, 1e300, 0.3];
        let ds = DatasetFile {
            record: SignalRecord::new(u, y).unwrap(),
            n: Some(3),
        };
        let p = dir.path().join("d.csv");
        ds.write(&p).unwrap();
        let back = DatasetFile::read(&p).unwrap();
        assert_eq!(back, ds);
        for (a, b) in back.record.y().iter().zip(ds.record.y()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = TruthFile {
            g: vec![0.6, 0.8],
            c: vec![1.0 / 7.0, -2.0],
            sigma2: 0.125,
        };
        let p = truth_path(&dir.path().join("run.csv"));
        assert!(p.ends_with("run.truth.csv"));
        t.write(&p).unwrap();
        assert_eq!(TruthFile::read(&p).unwrap(), t);
    }

    #[test]
    fn rejects_non_finite_values() {
        let dir = tempfile::tempdir().unwrap();
        for bad in ["NaN", "inf", "-inf"] {
            let p = write(dir.path(), "d.csv", &format!("u,y\n1,2\n{bad},3\n"));
            let err = DatasetFile::read(&p).unwrap_err().to_string();
            assert!(err.contains(":3:"), "{err}");
        }
    }

    #[test]
    fn mismatched_columns_name_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "d.csv",
            "# kbh dataset\n# N=3\nu,y\n1,2\n3\n4,5\n",
        );
        let err = DatasetFile::read(&p).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let msg = err.to_string();
        assert!(msg.contains("d.csv:5:"), "{msg}");
        assert!(msg.contains("1 fields"), "{msg}");
    }

    #[test]
    fn header_row_count_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "d.csv", "# N=4\nu,y\n1,2\n");
        assert!(DatasetFile::read(&p)
            .unwrap_err()
            .to_string()
            .contains("N=4"));
        let p = write(dir.path(), "d.csv", "x,y\n1,2\n");
        assert!(DatasetFile::read(&p).is_err());
        let p = write(dir.path(), "d.csv", "u,y\n");
        assert!(DatasetFile::read(&p).is_err());
    }

    #[test]
    fn bad_numbers_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "d.csv", "u,y\n1,2\n1,abc\n");
        let msg = DatasetFile::read(&p).unwrap_err().to_string();
        assert!(msg.contains(":3:") && msg.contains("abc"), "{msg}");
    }
}
