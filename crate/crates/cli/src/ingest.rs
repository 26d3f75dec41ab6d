//! CSV ingestion: rectangular numeric tables, one row per time step, with
//! optional header auto-detection and column normalization.

use std::path::Path;

use nalgebra::DVector;

use crate::{CliError, Normalize};

/// Reads a CSV file into one vector per time step.
///
/// The first row is treated as a header and skipped when any of its cells
/// fails to parse as a number; every later row must be fully numeric and as
/// wide as the first data row. Errors name the offending row and column
/// (1-based, counting data rows after any header).
pub fn ingest_csv(path: &Path, normalize: Normalize) -> Result<Vec<DVector<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if record.iter().all(|f| f.is_empty()) {
            continue; // blank line
        }
        let mut row = Vec::with_capacity(record.len());
        let mut bad_column = None;
        for (column, field) in record.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) => {
                    bad_column = Some(column);
                    break;
                }
            }
        }
        if let Some(column) = bad_column {
            if index == 0 {
                continue; // header row
            }
            return Err(CliError::Io(format!(
                "{}: non-numeric cell at data row {}, column {}",
                path.display(),
                rows.len() + 1,
                column + 1
            )));
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::Io(format!(
                    "{}: ragged table — data row {} has {} columns, expected {}",
                    path.display(),
                    rows.len() + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(CliError::Io(format!(
            "{}: no data rows",
            path.display()
        )));
    }

    let mut data: Vec<DVector<f64>> = rows.into_iter().map(DVector::from_vec).collect();
    if normalize == Normalize::MaxAbs {
        normalize_max_abs(&mut data);
    }
    Ok(data)
}

/// Divides each column by its maximum absolute value over the whole stream.
/// An all-zero column keeps divisor 1 so it passes through unchanged.
pub fn normalize_max_abs(data: &mut [DVector<f64>]) {
    let Some(first) = data.first() else {
        return;
    };
    let dims = first.len();
    let mut divisors = vec![0.0_f64; dims];
    for row in data.iter() {
        for (d, value) in row.iter().enumerate() {
            divisors[d] = divisors[d].max(value.abs());
        }
    }
    for divisor in &mut divisors {
        if *divisor == 0.0 {
            *divisor = 1.0;
        }
    }
    for row in data.iter_mut() {
        for (d, value) in row.iter_mut().enumerate() {
            *value /= divisors[d];
        }
    }
}
