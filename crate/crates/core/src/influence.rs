//! Empirical influence of each observation on the out-of-bag error.
//!
//! The influence D_i combines a centered per-observation loss with a
//! covariance term between the inbag count of observation i and the
//! out-of-bag cross term of every observation j. Summing squared influences
//! gives the delta-method (infinitesimal jackknife) standard error without
//! growing any extra trees.
//!
//! The covariance term centers the inbag count at 1 (its exact expectation
//! when every distinct sample is present; used on exhaustive enumerations)
//! or at the per-observation sample average of counts (the practical choice
//! on sampled forests).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{InbagMatrix, PredictionMatrix};
use crate::loss::Loss;
use crate::scalar::Real;

/// How the inbag count is centered inside the covariance term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfluenceVariant {
    /// Center at the exact expectation 1. For exhaustive forests.
    ExactMinusOne,
    /// Center at the per-observation mean count over the B samples.
    /// Default for sampled forests.
    SampleAverage,
}

/// Influence values together with the centering variant and the OOB
/// inflation factor e_n = (1 - 1/n)^(-n) used to compute them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfluenceVector<F> {
    pub values: Vec<F>,
    pub variant: InfluenceVariant,
    pub e_n: F,
}

/// e_n = (1 - 1/n)^(-n), evaluated as exp(-n log(1 - 1/n)).
pub fn oob_inflation<F: Real>(n: usize) -> F {
    let n = n as f64;
    F::from_f64_lossy((-n * (1.0 - 1.0 / n).ln()).exp())
}

fn centers<F: Real>(inbag: &InbagMatrix, variant: InfluenceVariant) -> Vec<F> {
    match variant {
        InfluenceVariant::ExactMinusOne => vec![F::one(); inbag.n()],
        InfluenceVariant::SampleAverage => inbag.mean_counts(),
    }
}

/// Shared accumulation: D_i = (1/n)(q_i - q_bar)
///                          + scale * (1/B) * (sum_b N_i^(b) t_b - c_i sum_b t_b)
/// with t_b = sum over OOB j of w_j (P_jb - center_j). Everything is summed
/// in a fixed order so results do not depend on parallelism.
fn influence_kernel<F: Real>(
    p: &PredictionMatrix<F>,
    inbag: &InbagMatrix,
    q: &[F],
    w: &[F],
    center: &[F],
    c: &[F],
    scale: F,
) -> Vec<F> {
    let n = inbag.n();
    let b = inbag.b();
    let n_f = F::from_count(n);
    let b_f = F::from_count(b);

    let q_bar = q.iter().fold(F::zero(), |acc, &v| acc + v) / n_f;

    // Per-tree cross terms.
    let mut t = vec![F::zero(); b];
    for (col, slot) in t.iter_mut().enumerate() {
        let preds = p.col(col);
        let bag = inbag.col(col);
        let mut acc = F::zero();
        for j in 0..n {
            if bag[j] == 0 {
                acc += w[j] * (preds[j] - center[j]);
            }
        }
        *slot = acc;
    }
    let t_total = t.iter().fold(F::zero(), |acc, &v| acc + v);

    (0..n)
        .map(|i| {
            let mut weighted = F::zero();
            for (col, &t_b) in t.iter().enumerate() {
                let count = inbag.count(i, col);
                if count != 0 {
                    weighted += F::from_u32(count).unwrap() * t_b;
                }
            }
            let cov = (weighted - c[i] * t_total) / b_f;
            (q[i] - q_bar) / n_f + scale * cov
        })
        .collect()
}

/// Square-loss influence (regression).
///
/// `oob_pred` is the vector of OOB mean predictions. The covariance term is
/// -2 e_n / n times the bootstrap covariance between the centered inbag
/// count and the residual cross term.
pub fn delta_influence<F: Real>(
    p: &PredictionMatrix<F>,
    inbag: &InbagMatrix,
    y: &[F],
    oob_pred: &[F],
    variant: InfluenceVariant,
) -> Result<InfluenceVector<F>> {
    let n = inbag.n();
    check_shapes(p, inbag, y)?;
    if oob_pred.len() != n {
        return Err(Error::Input("oob_pred length mismatch".into()));
    }
    let e_n = oob_inflation::<F>(n);
    let q: Vec<F> = y
        .iter()
        .zip(oob_pred)
        .map(|(&a, &b)| Loss::SquareError.eval(a, b))
        .collect();
    let resid: Vec<F> = y.iter().zip(oob_pred).map(|(&a, &b)| a - b).collect();
    let c = centers(inbag, variant);
    let two = F::from_f64_lossy(2.0);
    let scale = -(two * e_n) / F::from_count(n);
    let values = influence_kernel(p, inbag, &q, &resid, oob_pred, &c, scale);
    Ok(InfluenceVector { values, variant, e_n })
}

/// Influence under an arbitrary differentiable loss.
///
/// The square loss reproduces `delta_influence` (the derivative -2(a - b)
/// absorbs the sign and factor). Misclassification is rejected; use
/// `classification_delta_influence`.
pub fn generic_loss_influence<F: Real>(
    p: &PredictionMatrix<F>,
    inbag: &InbagMatrix,
    y: &[F],
    oob_pred: &[F],
    loss: Loss,
    variant: InfluenceVariant,
) -> Result<InfluenceVector<F>> {
    let n = inbag.n();
    check_shapes(p, inbag, y)?;
    if oob_pred.len() != n {
        return Err(Error::Input("oob_pred length mismatch".into()));
    }
    let e_n = oob_inflation::<F>(n);
    let mut q = Vec::with_capacity(n);
    let mut deriv = Vec::with_capacity(n);
    for (&a, &b) in y.iter().zip(oob_pred) {
        q.push(loss.eval(a, b));
        deriv.push(loss.derivative(a, b)?);
    }
    let c = centers(inbag, variant);
    let scale = e_n / F::from_count(n);
    let values = influence_kernel(p, inbag, &q, &deriv, oob_pred, &c, scale);
    Ok(InfluenceVector { values, variant, e_n })
}

/// Two-class influence: misclassification rewritten as squared error on the
/// 0/1 scale.
///
/// The centered loss and the residual use the thresholded majority vote
/// `oob_pred`; the per-tree difference inside the covariance term compares
/// each 0/1 vote against the same observation's raw OOB vote fraction
/// `vote_fraction`.
pub fn classification_delta_influence<F: Real>(
    p: &PredictionMatrix<F>,
    inbag: &InbagMatrix,
    y: &[F],
    vote_fraction: &[F],
    oob_pred: &[F],
    variant: InfluenceVariant,
) -> Result<InfluenceVector<F>> {
    let n = inbag.n();
    check_shapes(p, inbag, y)?;
    if oob_pred.len() != n || vote_fraction.len() != n {
        return Err(Error::Input("aggregate vector length mismatch".into()));
    }
    if p.data().iter().any(|&v| v != F::zero() && v != F::one()) {
        return Err(Error::Input(
            "classification influence needs hard 0/1 tree votes".into(),
        ));
    }
    let e_n = oob_inflation::<F>(n);
    let q: Vec<F> = y
        .iter()
        .zip(oob_pred)
        .map(|(&a, &b)| Loss::SquareError.eval(a, b))
        .collect();
    let resid: Vec<F> = y.iter().zip(oob_pred).map(|(&a, &b)| a - b).collect();
    let c = centers(inbag, variant);
    let two = F::from_f64_lossy(2.0);
    let scale = -(two * e_n) / F::from_count(n);
    let values = influence_kernel(p, inbag, &q, &resid, vote_fraction, &c, scale);
    Ok(InfluenceVector { values, variant, e_n })
}

fn check_shapes<F: Real>(
    p: &PredictionMatrix<F>,
    inbag: &InbagMatrix,
    y: &[F],
) -> Result<()> {
    if p.rows() != inbag.n() || p.cols() != inbag.b() || y.len() != inbag.n() {
        return Err(Error::Input("shape mismatch between P, N, and y".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Task};
    use crate::forest::{exhaustive_forest, train_forest, ForestConfig, ToyPredictor};
    use crate::oob::oob_predictions;
    use crate::weighting::statistic_derivative_fd;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn oob_inflation_matches_the_closed_form() {
        for n in [2usize, 3, 10, 110] {
            let direct = (1.0 - 1.0 / n as f64).powi(-(n as i32));
            let e: f64 = oob_inflation(n);
            assert!((e - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn zero_residuals_zero_influence() {
        // Constant response: every tree predicts the constant, so both the
        // centered-loss and covariance terms vanish.
        let d = Dataset::from_rows(
            &[vec![1.0f64], vec![2.0], vec![3.0], vec![4.0]],
            vec![3.0; 4],
            Task::Regression,
        )
        .unwrap();
        let model = train_forest(&d, &ForestConfig::new(30, 5)).unwrap();
        let p = crate::forest::tree_prediction_matrix(&model, d.x()).unwrap();
        let o = oob_predictions(&p, &model.inbag, Task::Regression).unwrap();
        let infl =
            delta_influence(&p, &model.inbag, d.y(), &o.pred, InfluenceVariant::SampleAverage)
                .unwrap();
        assert!(infl.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exhaustive_influence_matches_the_derivative_oracle() {
        let d = Dataset::from_rows(
            &[vec![1.0f64], vec![2.0], vec![3.0]],
            vec![0.0, 3.0, 6.0],
            Task::Regression,
        )
        .unwrap();
        let ex = exhaustive_forest(&d, ToyPredictor::BootstrapMean).unwrap();
        let o = oob_predictions(&ex.predictions, &ex.inbag, Task::Regression).unwrap();
        let infl = delta_influence(
            &ex.predictions,
            &ex.inbag,
            d.y(),
            &o.pred,
            InfluenceVariant::ExactMinusOne,
        )
        .unwrap();
        for i in 0..3 {
            let fd =
                statistic_derivative_fd(&ex.predictions, &ex.inbag, d.y(), i, 1e-6, Loss::SquareError)
                    .unwrap();
            let closed = 3.0 * infl.values[i];
            assert!(
                (closed - fd).abs() <= 1e-6 * fd.abs().max(1e-12),
                "i={i}: closed {closed} vs fd {fd}"
            );
        }
    }

    #[test]
    fn centered_term_sums_to_zero_on_a_sampled_forest() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + rng.gen::<f64>()).collect();
        let d = Dataset::from_rows(&rows, y, Task::Regression).unwrap();
        let model = train_forest(&d, &ForestConfig::new(300, 9)).unwrap();
        let p = crate::forest::tree_prediction_matrix(&model, d.x()).unwrap();
        let o = oob_predictions(&p, &model.inbag, Task::Regression).unwrap();
        let (_, q) = crate::oob::oob_error(d.y(), &o.pred, Loss::SquareError).unwrap();
        let n = d.n() as f64;
        let q_bar: f64 = q.iter().sum::<f64>() / n;
        let total: f64 = q.iter().map(|&qi| (qi - q_bar) / n).sum();
        assert!(total.abs() <= 1e-10);
    }

    #[test]
    fn square_loss_generic_equals_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] - r[1] + rng.gen::<f64>()).collect();
        let d = Dataset::from_rows(&rows, y, Task::Regression).unwrap();
        let model = train_forest(&d, &ForestConfig::new(200, 3)).unwrap();
        let p = crate::forest::tree_prediction_matrix(&model, d.x()).unwrap();
        let o = oob_predictions(&p, &model.inbag, Task::Regression).unwrap();

        let a = delta_influence(&p, &model.inbag, d.y(), &o.pred, InfluenceVariant::SampleAverage)
            .unwrap();
        let b = generic_loss_influence(
            &p,
            &model.inbag,
            d.y(),
            &o.pred,
            Loss::SquareError,
            InfluenceVariant::SampleAverage,
        )
        .unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn absolute_loss_zero_residuals_zero_influence() {
        let d = Dataset::from_rows(
            &[vec![1.0f64], vec![2.0], vec![3.0], vec![4.0]],
            vec![2.0; 4],
            Task::Regression,
        )
        .unwrap();
        let model = train_forest(&d, &ForestConfig::new(20, 8)).unwrap();
        let p = crate::forest::tree_prediction_matrix(&model, d.x()).unwrap();
        let o = oob_predictions(&p, &model.inbag, Task::Regression).unwrap();
        let infl = generic_loss_influence(
            &p,
            &model.inbag,
            d.y(),
            &o.pred,
            Loss::AbsoluteError,
            InfluenceVariant::SampleAverage,
        )
        .unwrap();
        // sign(0) = 0, so both terms vanish exactly.
        assert!(infl.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn absolute_loss_matches_the_derivative_oracle() {
        let d = Dataset::from_rows(
            &[vec![1.0f64], vec![2.0], vec![3.0]],
            vec![0.0, 3.0, 6.0],
            Task::Regression,
        )
        .unwrap();
        let ex = exhaustive_forest(&d, ToyPredictor::BootstrapMean).unwrap();
        let o = oob_predictions(&ex.predictions, &ex.inbag, Task::Regression).unwrap();
        let infl = generic_loss_influence(
            &ex.predictions,
            &ex.inbag,
            d.y(),
            &o.pred,
            Loss::AbsoluteError,
            InfluenceVariant::ExactMinusOne,
        )
        .unwrap();
        for i in 0..3 {
            let fd = statistic_derivative_fd(
                &ex.predictions,
                &ex.inbag,
                d.y(),
                i,
                1e-6,
                Loss::AbsoluteError,
            )
            .unwrap();
            let closed = 3.0 * infl.values[i];
            assert!(
                (closed - fd).abs() <= 1e-5 * fd.abs().max(1e-12),
                "i={i}: closed {closed} vs fd {fd}"
            );
        }
    }

    #[test]
    fn misclassification_is_rejected_by_the_generic_path() {
        let d = Dataset::from_rows(
            &[vec![0.0f64], vec![1.0], vec![2.0]],
            vec![0.0, 1.0, 1.0],
            Task::Classification,
        )
        .unwrap();
        let ex = exhaustive_forest(&d, ToyPredictor::Stump).unwrap();
        let o = oob_predictions(&ex.predictions, &ex.inbag, Task::Classification).unwrap();
        let err = generic_loss_influence(
            &ex.predictions,
            &ex.inbag,
            d.y(),
            &o.pred,
            Loss::Misclassification,
            InfluenceVariant::ExactMinusOne,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonDifferentiableLoss(_)));
        assert!(err.to_string().contains("classification"));
    }

    #[test]
    fn unanimous_correct_votes_zero_classification_influence() {
        // Craft votes directly: every OOB vote equals the label. Each tree
        // leaves out one pair of rows, so every row has OOB trees.
        let n = 4;
        let left_out: [[usize; 2]; 6] = [[0, 1], [2, 3], [0, 2], [1, 3], [0, 3], [1, 2]];
        let b = left_out.len();
        let mut inbag = crate::mat::Mat::<u32>::zeros(n, b);
        let mut preds = crate::mat::Mat::<f64>::zeros(n, b);
        let y = [0.0, 0.0, 1.0, 1.0];
        for (col, out) in left_out.iter().enumerate() {
            for i in 0..n {
                *inbag.get_mut(i, col) = if out.contains(&i) { 0 } else { 2 };
                *preds.get_mut(i, col) = y[i];
            }
        }
        let inbag = InbagMatrix::from_mat(inbag).unwrap();
        let o = oob_predictions(&preds, &inbag, Task::Classification).unwrap();
        let infl = classification_delta_influence(
            &preds,
            &inbag,
            &y,
            &o.mean,
            &o.pred,
            InfluenceVariant::SampleAverage,
        )
        .unwrap();
        assert!(infl.values.iter().all(|&v| v == 0.0));
    }
}
