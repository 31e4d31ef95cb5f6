//! Matrix-bundle interchange: the (P, N, y) triplet the estimators consume,
//! as column-oriented CSV plus a JSON sidecar.
//!
//! The CSV has one row per observation with columns
//! `y, n0..n{B-1}, p0..p{B-1}`; reals use the shortest decimal
//! representation that round-trips, so export-then-import is bit-exact.
//! The sidecar (same path with extension `.json`) records shapes, the task
//! tag, and a SHA-256 digest of the CSV bytes. Forests grown by other
//! software can be analyzed by writing this format.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::forest::{InbagMatrix, PredictionMatrix};
use crate::mat::Mat;

use super::{fmt_f64, parse_f64};

/// In-memory bundle: per-tree predictions, inbag counts, responses.
#[derive(Debug, Clone)]
pub struct MatrixBundle {
    pub predictions: PredictionMatrix<f64>,
    pub inbag: InbagMatrix,
    pub y: Vec<f64>,
    pub task: Task,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    n: usize,
    b: usize,
    task: Task,
    sha256: String,
}

impl MatrixBundle {
    pub fn new(
        predictions: PredictionMatrix<f64>,
        inbag: InbagMatrix,
        y: Vec<f64>,
        task: Task,
    ) -> Result<Self> {
        if predictions.rows() != inbag.n()
            || predictions.cols() != inbag.b()
            || y.len() != inbag.n()
        {
            return Err(Error::Input("bundle shapes are inconsistent".into()));
        }
        if predictions.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("bundle predictions contain non-finite values".into()));
        }
        Ok(MatrixBundle {
            predictions,
            inbag,
            y,
            task,
        })
    }
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Write `<path>` (CSV) and `<path with .json>` (sidecar).
pub fn export_bundle(bundle: &MatrixBundle, csv_path: &Path) -> Result<()> {
    let n = bundle.inbag.n();
    let b = bundle.inbag.b();

    let mut out = String::new();
    out.push('y');
    for col in 0..b {
        out.push_str(&format!(",n{col}"));
    }
    for col in 0..b {
        out.push_str(&format!(",p{col}"));
    }
    out.push('\n');
    for i in 0..n {
        out.push_str(&fmt_f64(bundle.y[i]));
        for col in 0..b {
            out.push(',');
            out.push_str(&bundle.inbag.count(i, col).to_string());
        }
        for col in 0..b {
            out.push(',');
            out.push_str(&fmt_f64(bundle.predictions.at(i, col)));
        }
        out.push('\n');
    }

    let digest = format!("{:x}", Sha256::digest(out.as_bytes()));
    fs::write(csv_path, &out)?;
    let sidecar = Sidecar {
        n,
        b,
        task: bundle.task,
        sha256: digest,
    };
    fs::write(
        sidecar_path(csv_path),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

/// Read a bundle written by [`export_bundle`] (or compatible software),
/// verifying shapes and the sidecar digest.
pub fn import_bundle(csv_path: &Path) -> Result<MatrixBundle> {
    let raw = fs::read_to_string(csv_path)
        .map_err(|e| Error::Input(format!("{}: {e}", csv_path.display())))?;
    let sidecar_raw = fs::read_to_string(sidecar_path(csv_path)).map_err(|e| {
        Error::Input(format!(
            "{}: missing bundle sidecar: {e}",
            sidecar_path(csv_path).display()
        ))
    })?;
    let sidecar: Sidecar = serde_json::from_str(&sidecar_raw)?;

    let digest = format!("{:x}", Sha256::digest(raw.as_bytes()));
    if digest != sidecar.sha256 {
        return Err(Error::Input(format!(
            "{}: digest mismatch with sidecar (file changed?)",
            csv_path.display()
        )));
    }

    let mut lines = raw.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Input(format!("{}: empty bundle", csv_path.display())))?;
    let expected_fields = 1 + 2 * sidecar.b;
    if header.split(',').count() != expected_fields {
        return Err(Error::Input(format!(
            "{}: header has {} fields, sidecar says {}",
            csv_path.display(),
            header.split(',').count(),
            expected_fields
        )));
    }

    let mut y = Vec::with_capacity(sidecar.n);
    let mut counts = vec![0u32; sidecar.n * sidecar.b];
    let mut preds = vec![0.0f64; sidecar.n * sidecar.b];
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_fields {
            return Err(Error::Input(format!(
                "{}: row {} has {} fields, expected {expected_fields}",
                csv_path.display(),
                i + 1,
                fields.len()
            )));
        }
        let yv = parse_f64(fields[0]).ok_or_else(|| {
            Error::Input(format!("{}: row {}: bad response", csv_path.display(), i + 1))
        })?;
        y.push(yv);
        for col in 0..sidecar.b {
            let c: u32 = fields[1 + col].parse().map_err(|_| {
                Error::Input(format!(
                    "{}: row {}: bad inbag count {:?}",
                    csv_path.display(),
                    i + 1,
                    fields[1 + col]
                ))
            })?;
            counts[col * sidecar.n + i] = c;
            let p = parse_f64(fields[1 + sidecar.b + col]).ok_or_else(|| {
                Error::Input(format!(
                    "{}: row {}: bad prediction {:?}",
                    csv_path.display(),
                    i + 1,
                    fields[1 + sidecar.b + col]
                ))
            })?;
            preds[col * sidecar.n + i] = p;
        }
        rows += 1;
    }
    if rows != sidecar.n {
        return Err(Error::Input(format!(
            "{}: {} data rows, sidecar says {}",
            csv_path.display(),
            rows,
            sidecar.n
        )));
    }

    let inbag = InbagMatrix::from_mat(Mat::from_vec(sidecar.n, sidecar.b, counts)?)?;
    let predictions = Mat::from_vec(sidecar.n, sidecar.b, preds)?;
    MatrixBundle::new(predictions, inbag, y, sidecar.task)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::forest::{train_forest, tree_prediction_matrix, ForestConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_bundle() -> MatrixBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 10.0 + rng.gen::<f64>()).collect();
        let d = Dataset::from_rows(&rows, y, Task::Regression).unwrap();
        let model = train_forest(&d, &ForestConfig::new(30, 3)).unwrap();
        let p = tree_prediction_matrix(&model, d.x()).unwrap();
        MatrixBundle::new(p, model.inbag.clone(), d.y().to_vec(), Task::Regression).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let bundle = sample_bundle();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bundle.csv");
        export_bundle(&bundle, &path).unwrap();
        let back = import_bundle(&path).unwrap();
        assert_eq!(back.y, bundle.y);
        assert_eq!(back.inbag, bundle.inbag);
        assert_eq!(back.predictions.data(), bundle.predictions.data());
        assert_eq!(back.task, bundle.task);
    }

    #[test]
    fn digest_mismatch_is_detected() {
        let bundle = sample_bundle();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bundle.csv");
        export_bundle(&bundle, &path).unwrap();
        let mut content = fs::read_to_string(&path).unwrap();
        content.push('\n');
        fs::write(&path, content).unwrap();
        assert!(import_bundle(&path).is_err());
    }
}
