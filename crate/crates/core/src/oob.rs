//! Out-of-bag predictions and out-of-bag error.

use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::forest::{InbagMatrix, PredictionMatrix};
use crate::loss::Loss;
use crate::scalar::Real;

/// Per-observation OOB aggregates.
///
/// `mean` is the plain average of out-of-bag tree predictions; for
/// classification it is the vote fraction. `pred` equals `mean` for
/// regression and the thresholded majority vote for classification
/// (a vote fraction of exactly 1/2 classifies as 0).
#[derive(Debug, Clone)]
pub struct OobPredictions<F> {
    pub pred: Vec<F>,
    pub mean: Vec<F>,
    pub counts: Vec<usize>,
}

/// OOB error plus the pieces the estimators reuse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OobSummary<F> {
    pub oob_pred: Vec<F>,
    pub oob_counts: Vec<usize>,
    pub err_oob: F,
    pub per_obs_loss: Vec<F>,
}

/// Aggregate per-tree predictions over each observation's out-of-bag trees.
///
/// Fails when some observation is in bag for every tree; the message names
/// the offending rows and the B/0.632 sizing rule of thumb.
pub fn oob_predictions<F: Real>(
    p: &PredictionMatrix<F>,
    inbag: &InbagMatrix,
    task: Task,
) -> Result<OobPredictions<F>> {
    let n = inbag.n();
    let b = inbag.b();
    if p.rows() != n || p.cols() != b {
        return Err(Error::Input(format!(
            "prediction matrix is {}x{}, inbag is {}x{}",
            p.rows(),
            p.cols(),
            n,
            b
        )));
    }

    let mut mean = vec![F::zero(); n];
    let mut counts = vec![0usize; n];
    for col in 0..b {
        let preds = p.col(col);
        let bag = inbag.col(col);
        for i in 0..n {
            if bag[i] == 0 {
                mean[i] += preds[i];
                counts[i] += 1;
            }
        }
    }

    let starving: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    if !starving.is_empty() {
        return Err(Error::InsufficientTrees {
            rows: starving,
            suggested: (b as f64 / 0.632).ceil() as usize,
        });
    }

    for i in 0..n {
        mean[i] /= F::from_count(counts[i]);
    }

    let pred = match task {
        Task::Regression => mean.clone(),
        Task::Classification => {
            let half = F::from_f64_lossy(0.5);
            mean.iter()
                .map(|&v| if v > half { F::one() } else { F::zero() })
                .collect()
        }
    };

    Ok(OobPredictions { pred, mean, counts })
}

/// Average loss of OOB predictions: ErrOOB and the per-observation loss.
pub fn oob_error<F: Real>(y: &[F], oob_pred: &[F], loss: Loss) -> Result<(F, Vec<F>)> {
    if y.len() != oob_pred.len() {
        return Err(Error::Input(format!(
            "response length {} does not match predictions length {}",
            y.len(),
            oob_pred.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::Input("empty response".into()));
    }
    for &b in oob_pred {
        loss.validate_prediction(b)?;
    }
    let q: Vec<F> = y
        .iter()
        .zip(oob_pred)
        .map(|(&a, &b)| loss.eval(a, b))
        .collect();
    let err = q.iter().fold(F::zero(), |acc, &v| acc + v) / F::from_count(q.len());
    Ok((err, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;
    use crate::forest::{exhaustive_forest, ToyPredictor};
    use crate::mat::Mat;

    fn inbag(n: usize, b: usize, counts: Vec<u32>) -> InbagMatrix {
        InbagMatrix::from_mat(Mat::from_vec(n, b, counts).unwrap()).unwrap()
    }

    #[test]
    fn constant_forest_has_constant_oob() {
        let p = Mat::from_vec(2, 2, vec![4.0f64, 4.0, 4.0, 4.0]).unwrap();
        let ib = inbag(2, 2, vec![0, 2, 2, 0]);
        let o = oob_predictions(&p, &ib, Task::Regression).unwrap();
        assert_eq!(o.pred, vec![4.0, 4.0]);
        assert_eq!(o.counts, vec![1, 1]);
    }

    #[test]
    fn exhaustive_mean_oob_prediction_by_symmetry() {
        // y = (0, 3, 6): the OOB prediction for row 1 averages bootstrap
        // means over the 8 samples drawn from rows {2, 3}: each draw has
        // expectation (3 + 6)/2, so the average is 4.5.
        let d = Dataset::from_rows(
            &[vec![1.0f64], vec![2.0], vec![3.0]],
            vec![0.0, 3.0, 6.0],
            Task::Regression,
        )
        .unwrap();
        let ex = exhaustive_forest(&d, ToyPredictor::BootstrapMean).unwrap();
        let o = oob_predictions(&ex.predictions, &ex.inbag, Task::Regression).unwrap();
        assert_eq!(o.counts[0], 8);
        assert!((o.pred[0] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn majority_vote_thresholds_the_fraction() {
        // Row 0 OOB in trees 0..3 with votes (1,1,0); row 1 OOB in tree 3.
        let p = Mat::from_vec(2, 4, vec![1.0f64, 9.0, 1.0, 9.0, 0.0, 9.0, 9.0, 1.0]).unwrap();
        let ib = inbag(2, 4, vec![0, 2, 0, 2, 0, 2, 2, 0]);
        let o = oob_predictions(&p, &ib, Task::Classification).unwrap();
        assert!((o.mean[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(o.pred[0], 1.0);
        assert_eq!(o.pred[1], 1.0);
    }

    #[test]
    fn tie_fraction_goes_to_class_zero() {
        // Row 0 OOB in 4 trees with votes (1,1,0,0); row 1 OOB in 2 trees.
        let n = 2;
        let b = 6;
        let counts = vec![
            0, 2, // tree 0
            0, 2, // tree 1
            0, 2, // tree 2
            0, 2, // tree 3
            2, 0, // tree 4
            2, 0, // tree 5
        ];
        let ib = inbag(n, b, counts);
        let p = Mat::from_vec(
            n,
            b,
            vec![1.0f64, 9.0, 1.0, 9.0, 0.0, 9.0, 0.0, 9.0, 9.0, 1.0, 9.0, 0.0],
        )
        .unwrap();
        // In-bag entries (9.0) must never be read.
        let o = oob_predictions(&p, &ib, Task::Classification).unwrap();
        assert_eq!(o.mean[0], 0.5);
        assert_eq!(o.pred[0], 0.0);
        assert_eq!(o.mean[1], 0.5);
        assert_eq!(o.pred[1], 0.0);
    }

    #[test]
    fn insufficient_trees_error_names_rows_and_guidance() {
        let p = Mat::from_vec(2, 1, vec![0.0f64, 0.0]).unwrap();
        let ib = inbag(2, 1, vec![0, 2]);
        let err = oob_predictions(&p, &ib, Task::Regression).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[1]"), "message was: {msg}");
        assert!(msg.contains("0.632"), "message was: {msg}");
    }

    #[test]
    fn oob_error_hand_cases() {
        let (err, q) = oob_error(&[0.0f64, 2.0], &[1.0, 1.0], Loss::SquareError).unwrap();
        assert_eq!(q, vec![1.0, 1.0]);
        assert_eq!(err, 1.0);

        for loss in [Loss::SquareError, Loss::AbsoluteError, Loss::Misclassification] {
            let (err, _) = oob_error(&[1.0f64, 2.0], &[1.0, 2.0], loss).unwrap();
            assert_eq!(err, 0.0);
        }
    }

    #[test]
    fn classification_indicator_equals_squared_error() {
        let y = [0.0f64, 1.0, 1.0, 0.0];
        let pred = [0.0f64, 0.0, 1.0, 1.0];
        let (e_ind, _) = oob_error(&y, &pred, Loss::Misclassification).unwrap();
        let (e_sq, _) = oob_error(&y, &pred, Loss::SquareError).unwrap();
        assert_eq!(e_ind, 0.5);
        assert_eq!(e_ind, e_sq);
    }

    #[test]
    fn deviance_rejects_out_of_range_predictions() {
        let err = oob_error(&[1.0f64], &[1.5], Loss::BinomialDeviance).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }
}
