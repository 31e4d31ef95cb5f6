//! CSV dataset ingestion and train/test splitting.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};

/// Load a rectangular headed CSV, extracting `response_column` as y and all
/// remaining columns as features. Non-numeric or missing cells are rejected
/// with their (1-based data) row number.
pub fn load_csv(path: &Path, response_column: &str, task: Task) -> Result<Dataset<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Input(format!("{}: cannot read header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(Error::Input(format!("{}: empty file", path.display())));
    }
    let response_idx = headers
        .iter()
        .position(|h| h == response_column)
        .ok_or_else(|| {
            Error::Input(format!(
                "{}: response column {response_column:?} not found; available columns: {}",
                path.display(),
                headers.join(", ")
            ))
        })?;

    let width = headers.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = row_idx + 1;
        if record.len() != width {
            return Err(Error::Input(format!(
                "{}: row {line} has {} fields, expected {width}",
                path.display(),
                record.len()
            )));
        }
        let mut features = Vec::with_capacity(width - 1);
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::Input(format!(
                    "{}: row {line}, column {:?}: {field:?} is not numeric",
                    path.display(),
                    headers[col]
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Input(format!(
                    "{}: row {line}, column {:?}: non-finite value",
                    path.display(),
                    headers[col]
                )));
            }
            if col == response_idx {
                y.push(value);
            } else {
                features.push(value);
            }
        }
        rows.push(features);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("{}: no data rows", path.display())));
    }
    if task == Task::Classification {
        if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Input(format!(
                "{}: row {}: classification response must be 0 or 1, got {}",
                path.display(),
                i + 1,
                y[i]
            )));
        }
    }
    Dataset::from_rows(&rows, y, task)
}

/// Uniform random partition into ceil(fraction * n) training rows and the
/// rest, deterministic in the seed. Row order is preserved within each part.
pub fn split_train_test(
    data: &Dataset<f64>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset<f64>, Dataset<f64>)> {
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::Input(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.n();
    let n_train = (train_fraction * n as f64).ceil() as usize;
    if n_train < 2 {
        return Err(Error::Input(format!(
            "train split would hold {n_train} rows; need at least 2"
        )));
    }
    if n - n_train < 1 {
        return Err(Error::Input("test split would be empty".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Fisher-Yates; only the first n_train slots matter.
    for k in 0..n {
        let swap = rng.gen_range(k..n);
        order.swap(k, swap);
    }
    let mut train_idx: Vec<usize> = order[..n_train].to_vec();
    let mut test_idx: Vec<usize> = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let gather = |idx: &[usize]| -> Result<Dataset<f64>> {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| data.row(i)).collect();
        let y: Vec<f64> = idx.iter().map(|&i| data.y()[i]).collect();
        Dataset::from_rows(&rows, y, data.task())
    };
    Ok((gather(&train_idx)?, gather(&test_idx)?))
}
