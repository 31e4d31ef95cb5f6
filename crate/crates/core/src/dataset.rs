//! Training data container and task tag.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Real;

/// Learning task. Classification is two-class with responses in {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Regression => write!(f, "regression"),
            Task::Classification => write!(f, "classification"),
        }
    }
}

/// Feature matrix plus response vector.
///
/// Features are stored column-major (one contiguous slice per feature),
/// which is the layout split search wants.
#[derive(Debug, Clone)]
pub struct Dataset<F> {
    x: Mat<F>,
    y: Vec<F>,
    task: Task,
}

impl<F: Real> Dataset<F> {
    /// Build and validate a dataset. `x` is n rows by p feature columns.
    pub fn new(x: Mat<F>, y: Vec<F>, task: Task) -> Result<Self> {
        let n = x.rows();
        let p = x.cols();
        if n < 2 {
            return Err(Error::Config(format!(
                "dataset needs at least 2 observations, got {n}"
            )));
        }
        if p < 1 {
            return Err(Error::Config("dataset needs at least 1 feature".into()));
        }
        if y.len() != n {
            return Err(Error::Input(format!(
                "response length {} does not match {} rows",
                y.len(),
                n
            )));
        }
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("feature matrix contains non-finite values".into()));
        }
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Input(format!("response row {i} is non-finite")));
            }
            if task == Task::Classification && *v != F::zero() && *v != F::one() {
                return Err(Error::Input(format!(
                    "classification response row {i} is {v}, expected 0 or 1"
                )));
            }
        }
        Ok(Dataset { x, y, task })
    }

    /// Build from row-major rows (convenience for tests and CSV ingestion).
    pub fn from_rows(rows: &[Vec<F>], y: Vec<F>, task: Task) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Input("feature rows have inconsistent lengths".into()));
        }
        let mut data = vec![F::zero(); n * p];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                data[j * n + i] = *v;
            }
        }
        Dataset::new(Mat::from_vec(n, p, data)?, y, task)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn x(&self) -> &Mat<F> {
        &self.x
    }

    /// One feature column as a contiguous slice.
    pub fn feature(&self, j: usize) -> &[F] {
        self.x.col(j)
    }

    pub fn y(&self) -> &[F] {
        &self.y
    }

    /// Feature values of one observation row (gathers across columns).
    pub fn row(&self, i: usize) -> Vec<F> {
        (0..self.p()).map(|j| self.x.at(i, j)).collect()
    }
}
