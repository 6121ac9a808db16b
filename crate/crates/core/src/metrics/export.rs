use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// One row per entity, rendered as CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// # Panics
    /// If the row width differs from the header width.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Invalid(format!("csv encoding failed: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields is utf-8"))
    }
}

/// Formats an optional number; missing values become empty cells.
pub fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |x| x.to_string())
}

/// One point of a plot-ready series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotPoint {
    pub x: Value,
    pub y: Value,
    pub label: String,
}

impl PlotPoint {
    pub fn new(x: impl Into<Value>, y: impl Into<Value>, label: impl Into<String>) -> Self {
        PlotPoint {
            x: x.into(),
            y: y.into(),
            label: label.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Plot {
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<PlotPoint>,
}

impl Plot {
    pub fn new(x_label: &str, y_label: &str) -> Self {
        Plot {
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
        }
    }
}

/// A metric rendered as a table and a plot.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub table: Table,
    pub plot: Plot,
}

/// Writes `<name>.csv` and `<name>.json` into `dir`.
pub fn write_artifact(dir: &Path, artifact: &Artifact) -> Result<[PathBuf; 2]> {
    let csv_path = dir.join(format!("{}.csv", artifact.name));
    let json_path = dir.join(format!("{}.json", artifact.name));
    fs::write(&csv_path, artifact.table.to_csv()?).map_err(|e| Error::io(&csv_path, e))?;
    let mut json = serde_json::to_string_pretty(&artifact.plot)?;
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    Ok([csv_path, json_path])
}
