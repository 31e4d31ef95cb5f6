//! The weighted out-of-bag statistic under an epsilon-perturbation of one
//! observation's weight.
//!
//! Observation weights enter in two places: directly, through the
//! per-observation probability mass f(j) = (1 - eps)/n + eps * 1{j = i},
//! and indirectly, through the likelihood ratio of each bootstrap sample,
//! r(b) = (1 - eps)^n * (1 + n*eps/(1 - eps))^(N_i^(b)). OOB predictions are
//! reweighted by r over each observation's out-of-bag trees, and the
//! weighted loss is summed. At eps = 0 this reproduces the OOB error
//! exactly; at eps = -1/(n-1) it reproduces the leave-one-out statistic that
//! the jackknife-after-bootstrap uses.

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::forest::{InbagMatrix, PredictionMatrix};
use crate::loss::Loss;
use crate::scalar::Real;

/// Evaluate the reweighted statistic S(F_{eps,i}).
///
/// `eps` must lie in [-1/(n-1), 1). The likelihood ratios are evaluated in
/// log space and normalized by their maximum so large inbag counts cannot
/// overflow. With `Loss::Misclassification` the reweighted vote fraction is
/// thresholded at 1/2 (ties to class 0) before the loss, mirroring the
/// majority-vote aggregation.
pub fn weighted_oob_statistic<F: Real>(
    p: &PredictionMatrix<F>,
    inbag: &InbagMatrix,
    y: &[F],
    i: usize,
    eps: F,
    loss: Loss,
) -> Result<F> {
    let n = inbag.n();
    let b = inbag.b();
    if p.rows() != n || p.cols() != b || y.len() != n {
        return Err(Error::Input("shape mismatch between P, N, and y".into()));
    }
    if i >= n {
        return Err(Error::Input(format!("observation index {i} out of range")));
    }

    let n_f = F::from_count(n);
    let lower = -(F::one() / (n_f - F::one()));
    if !(eps >= lower && eps < F::one()) {
        return Err(Error::Input(format!(
            "eps {eps} outside [-1/(n-1), 1) = [{lower}, 1)"
        )));
    }

    // log r(b) = n*log(1-eps) + N_i^(b) * log(1 + n*eps/(1-eps)).
    // At the left boundary the second log is -inf; a zero count must still
    // contribute log-ratio n*log(1-eps), so the N = 0 case is branched.
    let log_common = F::ln_1p(-eps) * n_f;
    let log_growth = F::ln_1p(n_f * eps / (F::one() - eps));
    let mut log_r = vec![F::zero(); b];
    let mut max_log = F::neg_infinity();
    for (col, slot) in log_r.iter_mut().enumerate() {
        let count = inbag.count(i, col);
        let v = if count == 0 {
            log_common
        } else {
            log_common + log_growth * F::from_u32(count).unwrap()
        };
        *slot = v;
        if v > max_log {
            max_log = v;
        }
    }
    if !max_log.is_finite() {
        return Err(Error::Numeric("all sample likelihood ratios vanished".into()));
    }
    let r: Vec<F> = log_r.iter().map(|&v| (v - max_log).exp()).collect();

    let half = F::from_f64_lossy(0.5);
    let mut total = F::zero();
    for j in 0..n {
        let weight = (F::one() - eps) / n_f + if j == i { eps } else { F::zero() };
        if weight == F::zero() {
            continue;
        }
        let mut num = F::zero();
        let mut den = F::zero();
        for col in 0..b {
            if inbag.is_oob(j, col) {
                num += p.at(j, col) * r[col];
                den += r[col];
            }
        }
        if den == F::zero() {
            return Err(Error::Numeric(format!(
                "reweighted out-of-bag denominator is zero for observation {j}"
            )));
        }
        let mut pred = num / den;
        if loss.thresholds_votes() {
            pred = if pred > half { F::one() } else { F::zero() };
        }
        total += weight * loss.eval(y[j], pred);
    }
    Ok(total)
}

/// Central finite difference of the reweighted statistic in eps at 0:
/// [S(F_{+eps,i}) - S(F_{-eps,i})] / (2 eps). Test oracle for the closed
/// forms; kept independent of the influence implementations.
pub fn statistic_derivative_fd<F: Real>(
    p: &PredictionMatrix<F>,
    inbag: &InbagMatrix,
    y: &[F],
    i: usize,
    eps: F,
    loss: Loss,
) -> Result<F> {
    let plus = weighted_oob_statistic(p, inbag, y, i, eps, loss)?;
    let minus = weighted_oob_statistic(p, inbag, y, i, -eps, loss)?;
    Ok((plus - minus) / (eps + eps))
}

/// Convenience: the task's conventional aggregation loss.
pub fn task_loss(task: Task) -> Loss {
    match task {
        Task::Regression => Loss::SquareError,
        Task::Classification => Loss::Misclassification,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Task};
    use crate::forest::{exhaustive_forest, ToyPredictor};
    use crate::oob::{oob_error, oob_predictions};

    fn exhaustive_n3() -> (Dataset<f64>, crate::forest::ExhaustiveForest<f64>) {
        let d = Dataset::from_rows(
            &[vec![1.0f64], vec![2.0], vec![3.0]],
            vec![0.0, 3.0, 6.0],
            Task::Regression,
        )
        .unwrap();
        let ex = exhaustive_forest(&d, ToyPredictor::BootstrapMean).unwrap();
        (d, ex)
    }

    #[test]
    fn at_zero_the_statistic_is_the_oob_error() {
        let (d, ex) = exhaustive_n3();
        let o = oob_predictions(&ex.predictions, &ex.inbag, Task::Regression).unwrap();
        let (err, _) = oob_error(d.y(), &o.pred, Loss::SquareError).unwrap();
        for i in 0..3 {
            let s =
                weighted_oob_statistic(&ex.predictions, &ex.inbag, d.y(), i, 0.0, Loss::SquareError)
                    .unwrap();
            assert!((s - err).abs() <= 1e-15 * err.abs());
        }
    }

    #[test]
    fn boundary_eps_drops_the_observation() {
        // At eps = -1/(n-1) observation i has weight ~0 and only trees with
        // N_i = 0 keep positive likelihood: the leave-one-out statistic.
        let (d, ex) = exhaustive_n3();
        let n = 3.0f64;
        let eps = -1.0 / (n - 1.0);
        let i = 0;
        let s = weighted_oob_statistic(&ex.predictions, &ex.inbag, d.y(), i, eps, Loss::SquareError)
            .unwrap();

        // Direct leave-one-out evaluation over trees excluding i.
        let mut expected = 0.0;
        for j in 1..3 {
            let mut num = 0.0;
            let mut den = 0.0;
            for b in 0..ex.inbag.b() {
                if ex.inbag.is_oob(i, b) && ex.inbag.is_oob(j, b) {
                    num += ex.predictions.at(j, b);
                    den += 1.0;
                }
            }
            let pred = num / den;
            expected += (d.y()[j] - pred).powi(2) / (n - 1.0);
        }
        assert!(
            (s - expected).abs() <= 1e-12 * expected.abs().max(1.0),
            "{s} vs {expected}"
        );
    }

    #[test]
    fn eps_out_of_range_is_rejected() {
        let (d, ex) = exhaustive_n3();
        for bad in [-0.9, 1.0, 1.5] {
            assert!(weighted_oob_statistic(
                &ex.predictions,
                &ex.inbag,
                d.y(),
                0,
                bad,
                Loss::SquareError
            )
            .is_err());
        }
    }
}
