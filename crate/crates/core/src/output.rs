//! CSV and JSON emission of experiment results.
//!
//! Floats are written in Rust's shortest round-trip decimal form, so a
//! parsed CSV reproduces every numeric field bit for bit. Missing values
//! are written as `NaN`.

use std::io::{Read, Write};

use serde::Serialize;

use crate::harness::{ExperimentResult, ExperimentSpec, ResultRow};
use crate::{Error, Result};

/// CSV header: the core columns followed by the series label and the
/// per-sample maximum.
pub const CSV_HEADER: [&str; 10] =
    ["n", "energy", "eta", "mean", "stderr", "samples", "reference", "ratio", "series", "sample_max"];

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            fmt(r.energy),
            fmt(r.eta),
            fmt(r.mean),
            fmt(r.stderr),
            r.samples.to_string(),
            fmt(r.reference),
            fmt(r.ratio),
            r.series.clone(),
            fmt(r.sample_max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Numeric(format!("CSV output is not UTF-8: {e}")))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let field = |k: usize| record.get(k).unwrap_or_default();
        let float = |k: usize| -> Result<f64> {
            field(k).parse().map_err(|_| {
                Error::Config(format!("row {}: column {} is not a number: {:?}", line + 1, CSV_HEADER[k], field(k)))
            })
        };
        let int = |k: usize| -> Result<usize> {
            field(k).parse().map_err(|_| {
                Error::Config(format!("row {}: column {} is not an integer: {:?}", line + 1, CSV_HEADER[k], field(k)))
            })
        };
        rows.push(ResultRow {
            n: int(0)?,
            energy: float(1)?,
            eta: float(2)?,
            mean: float(3)?,
            stderr: float(4)?,
            samples: int(5)?,
            reference: float(6)?,
            ratio: float(7)?,
            series: field(8).to_string(),
            sample_max: float(9)?,
        });
    }
    Ok(rows)
}

/// JSON summary document. Non-finite numbers are written as `null`.
#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub spec: &'a ExperimentSpec,
    pub rows: &'a [ResultRow],
    pub warnings: &'a [String],
    pub wall_time_s: f64,
    pub version: &'a str,
}

impl<'a> From<&'a ExperimentResult> for Summary<'a> {
    fn from(r: &'a ExperimentResult) -> Self {
        Self { spec: &r.spec, rows: &r.rows, warnings: &r.warnings, wall_time_s: r.wall_time_s, version: &r.version }
    }
}

pub fn write_json<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &Summary::from(result))?;
    Ok(())
}

pub fn to_json_string(result: &ExperimentResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Summary::from(result))?)
}
