//! Delimiter-separated input parsing and result export.
//!
//! Input files are comma-separated, one period per row, with an optional
//! header row and an optional leading label column (e.g. ISO-8601 dates).
//! A row is taken as a header when any field past the first fails to parse
//! as a number; the first column is taken as labels when its data entries
//! are non-numeric. All numeric output is written in scientific notation
//! with 12 significant digits, which round-trips through parsing.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use disagg_core::IndicatorPanel;

use crate::error::{CliError, Result};

/// An observed benchmark series with optional period labels.
#[derive(Clone, Debug)]
pub struct LowFrequencySeries {
    pub values: DVector<f64>,
    pub labels: Option<Vec<String>>,
}

impl LowFrequencySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }
}

/// A parsed rectangular table.
struct Table {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
}

fn is_number(field: &str) -> bool {
    field.trim().parse::<f64>().is_ok()
}

fn parse_field(path: &Path, line: usize, column: usize, field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| CliError::Parse {
        path: path.to_path_buf(),
        line,
        column: Some(column),
        message: format!("cannot parse {field:?} as a number"),
    })
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => CliError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => CliError::Parse {
                path: path.to_path_buf(),
                line: 1,
                column: None,
                message: e.to_string(),
            },
        })?;

    let mut records: Vec<Vec<String>> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(idx + 1),
            column: None,
            message: e.to_string(),
        })?;
        let fields: Vec<String> = record.iter().map(|f| f.to_string()).collect();
        if fields.iter().all(|f| f.trim().is_empty()) {
            continue; // skip blank lines
        }
        records.push(fields);
    }
    if records.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: None,
            message: "file contains no data rows".into(),
        });
    }

    let width = records[0].len();
    for (idx, row) in records.iter().enumerate() {
        if row.len() != width {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                column: None,
                message: format!("ragged row: expected {width} fields, found {}", row.len()),
            });
        }
    }

    // header: any non-numeric field past the first, or a single-column
    // file whose first field is non-numeric
    let first = &records[0];
    let has_header = if width == 1 {
        !is_number(&first[0])
    } else {
        first.iter().skip(1).any(|f| !is_number(f))
    };
    let data_start = usize::from(has_header);
    if records.len() == data_start {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: None,
            message: "file contains a header but no data rows".into(),
        });
    }

    // label column: first data field non-numeric, or a header naming the
    // first column as a period axis (only possible with >= 2 columns)
    let named_axis = has_header
        && matches!(
            first[0].trim().to_ascii_lowercase().as_str(),
            "period" | "date" | "time"
        );
    let has_labels = width >= 2 && (!is_number(&records[data_start][0]) || named_axis);
    let value_start = usize::from(has_labels);
    let d = width - value_start;
    if d == 0 {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: data_start + 1,
            column: None,
            message: "no numeric columns found".into(),
        });
    }

    let names: Vec<String> = if has_header {
        first[value_start..].iter().map(|s| s.trim().to_string()).collect()
    } else {
        (1..=d).map(|j| format!("x{j}")).collect()
    };

    let mut rows = Vec::with_capacity(records.len() - data_start);
    let mut labels = if has_labels { Some(Vec::new()) } else { None };
    for (idx, row) in records.iter().enumerate().skip(data_start) {
        let line = idx + 1;
        if let Some(labels) = labels.as_mut() {
            labels.push(row[0].trim().to_string());
        }
        let mut values = Vec::with_capacity(d);
        for (k, field) in row[value_start..].iter().enumerate() {
            values.push(parse_field(path, line, value_start + k + 1, field)?);
        }
        rows.push(values);
    }

    Ok(Table {
        names,
        rows,
        labels,
    })
}

/// Load a single-column benchmark series.
pub fn load_series(path: &Path) -> Result<LowFrequencySeries> {
    let table = read_table(path)?;
    let d = table.names.len();
    if d != 1 {
        return Err(CliError::Shape(format!(
            "{}: expected a single-column series, found {d} columns",
            path.display()
        )));
    }
    let values = DVector::from_iterator(table.rows.len(), table.rows.iter().map(|r| r[0]));
    Ok(LowFrequencySeries {
        values,
        labels: table.labels,
    })
}

/// Load an indicator panel (with optional period labels, which are
/// returned separately).
pub fn load_panel(path: &Path) -> Result<(IndicatorPanel, Option<Vec<String>>)> {
    let table = read_table(path)?;
    let n = table.rows.len();
    let d = table.names.len();
    let data = DMatrix::from_fn(n, d, |i, j| table.rows[i][j]);
    let panel = IndicatorPanel::new(data, table.names)?;
    Ok((panel, table.labels))
}

/// 12 significant digits, scientific notation.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

/// Write rows of pre-formatted fields as a comma-separated file.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = String::new();
    buf.push_str(&header.join(","));
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    fs::write(path, buf).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write a one-value-per-period file.
pub fn write_series(path: &Path, values: &DVector<f64>) -> Result<()> {
    let rows: Vec<Vec<String>> = (0..values.len())
        .map(|i| vec![(i + 1).to_string(), fmt_num(values[i])])
        .collect();
    write_csv(path, &["period", "value"], &rows)
}

pub fn ensure_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Append to a plain-text report, used for human-readable summaries.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(content.as_bytes()).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
