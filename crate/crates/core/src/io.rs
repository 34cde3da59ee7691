//! CSV readers for designs, responses and sign vectors.
//!
//! Every file starts with a header row. Missing design entries are the
//! literal token `NA`; numbers use `.` as decimal point.

use std::path::Path;

use crate::error::{Error, Result};
use crate::missing::IncompleteMatrix;
use crate::signs::SignVector;

pub const MISSING_TOKEN: &str = "NA";

/// Design matrix with column names; `NA` cells become missing entries.
#[derive(Debug, Clone)]
pub struct DesignCsv {
    pub columns: Vec<String>,
    pub matrix: IncompleteMatrix,
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<Option<f64>> {
    let t = cell.trim();
    if t == MISSING_TOKEN {
        return Ok(None);
    }
    let v: f64 = t
        .parse()
        .map_err(|_| Error::Parse(format!("row {row}, column {col}: cannot parse {t:?} as a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("row {row}, column {col}: non-finite value {t:?}")));
    }
    Ok(Some(v))
}

pub fn parse_design_csv(text: &str) -> Result<DesignCsv> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let columns: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != columns.len() {
            return Err(Error::Parse(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                rec.len(),
                columns.len()
            )));
        }
        rows.push(
            rec.iter()
                .enumerate()
                .map(|(j, c)| parse_cell(c, i + 1, j + 1))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.is_empty() {
        return Err(Error::Parse("design file has no data rows".into()));
    }
    Ok(DesignCsv {
        columns,
        matrix: IncompleteMatrix::from_options(&rows)?,
    })
}

pub fn read_design_csv(path: impl AsRef<Path>) -> Result<DesignCsv> {
    parse_design_csv(&std::fs::read_to_string(path)?)
}

/// Single-column numeric file with a header; `NA` is rejected.
pub fn parse_vector_csv(text: &str) -> Result<Vec<f64>> {
    let d = parse_design_csv(text)?;
    if d.matrix.cols() != 1 {
        return Err(Error::Parse(format!("expected one column, found {}", d.matrix.cols())));
    }
    if d.matrix.missing_count() > 0 {
        return Err(Error::Parse("response contains NA".into()));
    }
    Ok(d.matrix.values().to_vec())
}

pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_vector_csv(&std::fs::read_to_string(path)?)
}

/// Single-column file of `-1`, `0`, `1` with a header.
pub fn parse_signs_csv(text: &str) -> Result<SignVector> {
    let v = parse_vector_csv(text)?;
    let entries = v
        .iter()
        .map(|x| match *x {
            1.0 => Ok(1),
            -1.0 => Ok(-1),
            0.0 => Ok(0),
            x => Err(Error::Parse(format!("sign entries must be -1, 0 or 1, got {x}"))),
        })
        .collect::<Result<Vec<i8>>>()?;
    SignVector::new(entries)
}

pub fn read_signs_csv(path: impl AsRef<Path>) -> Result<SignVector> {
    parse_signs_csv(&std::fs::read_to_string(path)?)
}
