//! Small CSV helpers. Floats are written with `Display`, the shortest string
//! that parses back to the same bits, so files round-trip exactly.

use std::fs::File;
use std::path::{Path, PathBuf};

use crate::error::{HarnessError, Result};

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_records(path, file, &[], header, rows)
}

/// Like [`write_csv`], with `# ` comment lines before the header.
pub fn write_csv_with_comments<I>(
    path: &Path,
    comments: &[String],
    header: &[&str],
    rows: I,
) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_records(path, file, comments, header, rows)
}

fn write_records<I>(
    path: &Path,
    mut file: File,
    comments: &[String],
    header: &[&str],
    rows: I,
) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    use std::io::Write;
    for c in comments {
        writeln!(file, "# {c}").map_err(|e| HarnessError::io(path, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    let err = |e: csv::Error| HarnessError::io(path, e.into());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// A parsed CSV file: `#` lines are comments, the first other line is the
/// header. Rows keep their 1-based line numbers for error messages.
#[derive(Debug, Clone)]
pub struct Table {
    pub path: PathBuf,
    pub comments: Vec<String>,
    header: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub line: u64,
    pub fields: Vec<String>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let comments = text
            .lines()
            .filter_map(|l| l.strip_prefix('#'))
            .map(|l| l.trim().to_string())
            .collect();
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| HarnessError::parse(path, csv_line(&e), e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect::<Vec<_>>();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(HarnessError::parse(path, 1, "missing CSV header"));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record =
                record.map_err(|e| HarnessError::parse(path, csv_line(&e), e.to_string()))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != header.len() {
                return Err(HarnessError::parse(
                    path,
                    line,
                    format!(
                        "row has {} fields, expected {} ({})",
                        record.len(),
                        header.len(),
                        header.join(",")
                    ),
                ));
            }
            rows.push(Row {
                line,
                fields: record.iter().map(str::to_string).collect(),
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            comments,
            header,
            rows,
        })
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self
            .header
            .iter()
            .map(String::as_str)
            .eq(expected.iter().copied())
        {
            Ok(())
        } else {
            Err(HarnessError::parse(
                &self.path,
                self.header_line(),
                format!(
                    "unexpected header `{}`, expected `{}`",
                    self.header.join(","),
                    expected.join(",")
                ),
            ))
        }
    }

    fn header_line(&self) -> u64 {
        self.comments.len() as u64 + 1
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            HarnessError::parse(
                &self.path,
                self.header_line(),
                format!("missing column `{name}`"),
            )
        })
    }

    pub fn error(&self, row: &Row, message: impl Into<String>) -> HarnessError {
        HarnessError::parse(&self.path, row.line, message)
    }

    pub fn str<'a>(&self, row: &'a Row, col: usize) -> &'a str {
        &row.fields[col]
    }

    /// A finite float; NaN and infinities are rejected.
    pub fn f64(&self, row: &Row, col: usize) -> Result<f64> {
        let raw = &row.fields[col];
        let v: f64 = raw.parse().map_err(|_| {
            self.error(
                row,
                format!("`{raw}` in column {} is not a number", self.header[col]),
            )
        })?;
        if !v.is_finite() {
            return Err(self.error(
                row,
                format!("non-finite value `{raw}` in column {}", self.header[col]),
            ));
        }
        Ok(v)
    }

    /// Empty field reads as `None`.
    pub fn opt_f64(&self, row: &Row, col: usize) -> Result<Option<f64>> {
        if row.fields[col].is_empty() {
            Ok(None)
        } else {
            self.f64(row, col).map(Some)
        }
    }

    pub fn parse_as<T: std::str::FromStr>(&self, row: &Row, col: usize) -> Result<T> {
        let raw = &row.fields[col];
        raw.parse().map_err(|_| {
            self.error(
                row,
                format!("invalid value `{raw}` in column {}", self.header[col]),
            )
        })
    }
}

fn csv_line(e: &csv::Error) -> u64 {
    e.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads `key=value` pairs from comment lines such as `# N=500`.
pub fn comment_value<'a>(comments: &'a [String], key: &str) -> Option<&'a str> {
    comments.iter().find_map(|c| {
        let (k, v) = c.split_once('=')?;
        (k.trim() == key).then(|| v.trim())
    })
}
