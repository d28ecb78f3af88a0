//! CSV input and output.
//!
//! Comma separated, header row first, UTF-8, `.` as decimal mark. Every
//! cell must hold a finite number; empty cells and `NA` are rejected.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::{DMatrix, DVector};

use crate::input_error;

/// Covariates and response read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Covariate names in column order, response excluded.
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

pub fn read_dataset(path: &Path, response: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| input_error(format!("cannot open {}: {e}", path.display())))?;
    parse_dataset(file, response).with_context(|| format!("reading {}", path.display()))
}

/// Parses a dataset. Errors name the file line and the column.
pub fn parse_dataset<R: Read>(reader: R, response: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| input_error(format!("cannot read header row: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let Some(resp) = headers.iter().position(|h| h == response) else {
        return Err(input_error(format!(
            "response column `{response}` not found; columns are {}",
            headers.join(", ")
        )));
    };
    if let Some(dup) = headers.iter().enumerate().find_map(|(i, h)| headers[..i].contains(h).then_some(h)) {
        return Err(input_error(format!("duplicate column name `{dup}`")));
    }
    let width = headers.len();
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| match e.position() {
            Some(pos) => input_error(format!("line {}: {e}", pos.line())),
            None => input_error(e.to_string()),
        })?;
        let line = record.position().map_or(rows + 2, |p| p.line() as usize);
        for (col, cell) in record.iter().enumerate() {
            values.push(parse_cell(cell).map_err(|why| {
                input_error(format!("line {line}, column {} (`{}`): {why}", col + 1, headers[col]))
            })?);
        }
        rows += 1;
    }
    let all = DMatrix::from_row_slice(rows, width, &values);
    let y = all.column(resp).clone_owned();
    let x = all.remove_column(resp);
    let names = headers.into_iter().enumerate().filter(|&(i, _)| i != resp).map(|(_, h)| h).collect();
    Ok(Dataset { names, x, y })
}

fn parse_cell(cell: &str) -> std::result::Result<f64, String> {
    let t = cell.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") {
        return Err("missing value".into());
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(format!("`{t}` is not finite")),
        Err(_) => Err(format!("`{t}` is not a number")),
    }
}

/// Writes covariates `names` followed by the response column `response`.
pub fn write_dataset<W: Write>(
    writer: W,
    names: &[String],
    x: &DMatrix<f64>,
    response: &str,
    y: &DVector<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(names.iter().map(String::as_str).chain([response]))?;
    for i in 0..x.nrows() {
        let row: Vec<String> = x.row(i).iter().chain([&y[i]]).map(|v| v.to_string()).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `x1, x2, ...`
pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}
