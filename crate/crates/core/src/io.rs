// Copyright 2026 The convex-lse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


//! CSV ingestion of datasets and query points, and JSON documents for fitted
//! models and experiment reports.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same `f64`, so documents round-trip bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{Dataset, ScaleTransform};
use crate::error::{Error, Result};
use crate::model::{FitModel, SolveDiagnostics, Variant};
use crate::sim::ExperimentReport;

/// Version written into model documents.
pub const FORMAT_VERSION: i64 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// A numeric table with a header row. Rows in errors are 1-based file lines
/// (the header is line 1); columns are 1-based.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 2, |p| p.line()) as usize;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: line,
                column: record.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            let v = cell.parse::<f64>().map_err(|_| Error::Parse {
                row: line,
                column: j + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Reads a dataset from CSV text: `response` is the response column and the
/// other columns, in header order, are the coordinates.
pub fn parse_dataset<R: Read>(reader: R, response: &str) -> Result<(Dataset, Vec<String>)> {
    let table = read_table(reader)?;
    let col = table
        .header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::MissingColumn(response.to_owned()))?;
    let names: Vec<String> = table.header.iter().enumerate().filter(|&(j, _)| j != col).map(|(_, h)| h.clone()).collect();
    let d = names.len();
    if d == 0 {
        return Err(Error::ShapeMismatch("no coordinate columns besides the response".into()));
    }
    let mut points = Vec::with_capacity(table.rows.len() * d);
    let mut responses = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        for (j, &v) in row.iter().enumerate() {
            if j == col {
                responses.push(v);
            } else {
                points.push(v);
            }
        }
    }
    Ok((Dataset::from_flat(points, d, responses)?, names))
}

/// Reads a dataset from a CSV file; see [`parse_dataset`].
pub fn read_csv(path: impl AsRef<Path>, response: &str) -> Result<Dataset> {
    let path = path.as_ref();
    parse_dataset(open(path)?, response).map(|(data, _)| data)
}

/// Query points from CSV text: every column is a coordinate. Returns the
/// flat coordinates and the dimension.
pub fn parse_points<R: Read>(reader: R) -> Result<(Vec<f64>, usize)> {
    let table = read_table(reader)?;
    let d = table.header.len();
    let mut out = Vec::with_capacity(table.rows.len() * d);
    for (i, row) in table.rows.iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: i + 2,
                column: j + 1,
                message: "coordinate is not finite".into(),
            });
        }
        out.extend_from_slice(row);
    }
    Ok((out, d))
}

pub fn read_points(path: impl AsRef<Path>) -> Result<(Vec<f64>, usize)> {
    let path = path.as_ref();
    parse_points(open(path)?)
}

/// Writes a dataset as CSV with the given coordinate names and response name.
pub fn format_dataset<W: Write>(writer: W, data: &Dataset, names: &[String], response: &str) -> Result<()> {
    if names.len() != data.d() {
        return Err(Error::DimensionMismatch {
            expected: data.d(),
            got: names.len(),
        });
    }
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push(response);
    csv.write_record(&header)?;
    for k in 0..data.n() {
        let mut rec: Vec<String> = data.point(k).iter().map(|v| v.to_string()).collect();
        rec.push(data.responses()[k].to_string());
        csv.write_record(&rec)?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes a dataset to a CSV file with columns `x1..xd,y`.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let names: Vec<String> = (1..=data.d()).map(|i| format!("x{i}")).collect();
    format_dataset(create(path)?, data, &names, "y")
}

/// On-disk form of a [`FitModel`]. Points and subgradients are stored one
/// row per design point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: i64,
    pub variant: Variant,
    pub points: Vec<Vec<f64>>,
    pub fitted: Vec<f64>,
    pub subgradients: Vec<Vec<f64>>,
    pub diagnostics: SolveDiagnostics,
    pub scale_transform: ScaleTransform,
}

impl ModelDocument {
    pub fn from_model(model: &FitModel) -> Self {
        let d = model.d();
        ModelDocument {
            format_version: FORMAT_VERSION,
            variant: model.variant(),
            points: model.points().chunks(d).map(<[f64]>::to_vec).collect(),
            fitted: model.fitted().to_vec(),
            subgradients: model.subgradients().chunks(d).map(<[f64]>::to_vec).collect(),
            diagnostics: model.diagnostics().clone(),
            scale_transform: model.scale_transform().clone(),
        }
    }

    pub fn into_model(self) -> Result<FitModel> {
        let d = self.points.first().map_or(0, Vec::len);
        let rows_ok = self.points.iter().chain(&self.subgradients).all(|r| r.len() == d);
        if !rows_ok || self.points.len() != self.fitted.len() || self.subgradients.len() != self.fitted.len() {
            return Err(Error::SchemaMismatch("points, fitted and subgradients disagree in shape".into()));
        }
        let values = self.points.iter().chain(&self.subgradients).flatten().chain(&self.fitted);
        if values.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::SchemaMismatch("non-finite number in model arrays".into()));
        }
        FitModel::from_parts(
            self.variant,
            d,
            self.points.concat(),
            self.fitted,
            self.subgradients.concat(),
            self.diagnostics,
            self.scale_transform,
        )
        .map_err(|e| Error::SchemaMismatch(e.to_string()))
    }
}

pub fn model_to_json(model: &FitModel) -> Result<String> {
    serde_json::to_string_pretty(&ModelDocument::from_model(model)).map_err(|e| Error::SchemaMismatch(e.to_string()))
}

/// Parses a model document. The version is checked before the schema, so
/// documents from other versions report [`Error::VersionUnsupported`].
pub fn model_from_json(text: &str) -> Result<FitModel> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    let version = value
        .get("format_version")
        .ok_or_else(|| Error::SchemaMismatch("missing format_version".into()))?;
    let version = version
        .as_i64()
        .ok_or_else(|| Error::SchemaMismatch("format_version is not an integer".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let doc: ModelDocument = serde_json::from_value(value).map_err(|e| Error::SchemaMismatch(e.to_string()))?;
    doc.into_model()
}

pub fn write_model(path: impl AsRef<Path>, model: &FitModel) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let text = model_to_json(model)?;
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(io_err(path))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<FitModel> {
    let path = path.as_ref();
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(io_err(path))?;
    model_from_json(&text)
}

pub fn report_to_json(report: &ExperimentReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::SchemaMismatch(e.to_string()))
}

pub fn write_report_json(path: impl AsRef<Path>, report: &ExperimentReport) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let text = report_to_json(report)?;
    out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(io_err(path))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Flat table `n,rep,sup_error,grad_error,seconds`; failed cells leave the
/// error fields empty.
pub fn format_report_csv<W: Write>(writer: W, report: &ExperimentReport) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["n", "rep", "sup_error", "grad_error", "seconds"])?;
    for c in &report.cells {
        csv.write_record([
            c.n.to_string(),
            c.rep.to_string(),
            opt(c.sup_error),
            opt(c.grad_error),
            c.seconds.to_string(),
        ])?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_report_csv(path: impl AsRef<Path>, report: &ExperimentReport) -> Result<()> {
    let path = path.as_ref();
    format_report_csv(create(path)?, report)
}

/// One evaluated query point.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `f64::INFINITY` outside the domain of the envelope.
    pub value: f64,
    pub in_domain: bool,
    /// Supporting hyperplane `(xi, eta)`, when requested and available.
    pub hyperplane: Option<(Vec<f64>, f64)>,
}

fn number(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

/// Columns `value,in_domain`, followed by `xi_1..xi_d,eta` when
/// `subgradients` is set. Missing hyperplanes leave those fields empty.
pub fn format_predictions<W: Write>(writer: W, rows: &[Prediction], d: usize, subgradients: bool) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["value".to_owned(), "in_domain".to_owned()];
    if subgradients {
        header.extend((1..=d).map(|i| format!("xi_{i}")));
        header.push("eta".into());
    }
    csv.write_record(&header)?;
    for p in rows {
        let mut rec = vec![number(p.value), p.in_domain.to_string()];
        if subgradients {
            match &p.hyperplane {
                Some((xi, eta)) => {
                    rec.extend(xi.iter().map(|&v| number(v)));
                    rec.push(number(*eta));
                }
                None => rec.extend(std::iter::repeat_n(String::new(), d + 1)),
            }
        }
        csv.write_record(&rec)?;
    }
    csv.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_predictions(path: impl AsRef<Path>, rows: &[Prediction], d: usize, subgradients: bool) -> Result<()> {
    let path = path.as_ref();
    format_predictions(create(path)?, rows, d, subgradients)
}
