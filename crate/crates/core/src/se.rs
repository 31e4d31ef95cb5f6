//! Standard errors of the out-of-bag error: naive, delta-method (with the
//! conservative max rule), and jackknife-after-bootstrap.

use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::forest::{InbagMatrix, PredictionMatrix};
use crate::influence::{
    classification_delta_influence, delta_influence, generic_loss_influence, InfluenceVariant,
    InfluenceVector,
};
use crate::loss::Loss;
use crate::oob::{oob_error, oob_predictions};
use crate::scalar::Real;
use crate::weighting::task_loss;

/// Degenerate-pair bookkeeping for the jackknife-after-bootstrap.
///
/// An ordered pair (i, j) is degenerate when no tree has both i and j out
/// of bag; such pairs are dropped from the leave-i-out average and the
/// denominator shrinks accordingly.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct JabDiagnostics {
    pub degenerate_pairs: usize,
    pub total_pairs: usize,
    /// Set when more than 5% of ordered pairs are degenerate.
    pub warn_degenerate: bool,
}

/// Point estimate, the three standard errors (plus the conservative max),
/// and the ingredients they came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeReport<F> {
    pub err_oob: F,
    pub se_naive: F,
    pub se_delta: F,
    pub se_delta_plus: F,
    pub se_jab: F,
    pub influence: InfluenceVector<F>,
    pub loo_errors: Vec<F>,
    pub diagnostics: JabDiagnostics,
}

/// Standard error of the mean of `q` under independence: sample standard
/// deviation (n-1 denominator) over sqrt(n).
pub fn naive_se<F: Real>(q: &[F]) -> Result<F> {
    let n = q.len();
    if n < 2 {
        return Err(Error::Input(format!(
            "naive standard error needs n >= 2, got {n}"
        )));
    }
    let n_f = F::from_count(n);
    let mean = q.iter().fold(F::zero(), |acc, &v| acc + v) / n_f;
    let ssd = q
        .iter()
        .fold(F::zero(), |acc, &v| acc + (v - mean) * (v - mean));
    Ok((ssd / (n_f - F::one())).sqrt() / n_f.sqrt())
}

/// Delta-method standard error: the root sum of squared influences.
pub fn delta_se<F: Real>(influence: &InfluenceVector<F>) -> F {
    influence
        .values
        .iter()
        .fold(F::zero(), |acc, &v| acc + v * v)
        .sqrt()
}

/// Conservative combination: the larger of the naive and delta estimates.
pub fn delta_plus_se<F: Real>(se_naive: F, se_delta: F) -> F {
    se_naive.max(se_delta)
}

/// Leave-one-out errors recomputed from the existing trees.
///
/// For each left-out i, observation j's prediction aggregates only trees
/// where both i and j are out of bag; `loo_errors[i]` averages the loss
/// over the j != i with at least one such tree. Votes are thresholded for
/// the misclassification loss.
pub fn jab_leave_one_out<F: Real>(
    p: &PredictionMatrix<F>,
    inbag: &InbagMatrix,
    y: &[F],
    task: Task,
    loss: Loss,
) -> Result<(Vec<F>, JabDiagnostics)> {
    let n = inbag.n();
    let b = inbag.b();
    if p.rows() != n || p.cols() != b || y.len() != n {
        return Err(Error::Input("shape mismatch between P, N, and y".into()));
    }
    if n < 2 {
        return Err(Error::Input("jackknife needs n >= 2".into()));
    }

    // Row i must be out of bag somewhere at all.
    let starving: Vec<usize> = (0..n)
        .filter(|&i| (0..b).all(|col| !inbag.is_oob(i, col)))
        .collect();
    if !starving.is_empty() {
        return Err(Error::InsufficientTrees {
            rows: starving,
            suggested: (b as f64 / 0.632).ceil() as usize,
        });
    }

    // pair_sum[i][j] accumulates tree predictions for j over trees where
    // both i and j are out of bag; pair_count likewise. One pass over trees
    // with an outer product over each tree's OOB rows.
    let mut pair_sum = vec![F::zero(); n * n];
    let mut pair_count = vec![0u32; n * n];
    let mut oob_rows: Vec<usize> = Vec::with_capacity(n);
    for col in 0..b {
        let bag = inbag.col(col);
        let preds = p.col(col);
        oob_rows.clear();
        oob_rows.extend((0..n).filter(|&i| bag[i] == 0));
        for &i in &oob_rows {
            let base = i * n;
            for &j in &oob_rows {
                pair_sum[base + j] += preds[j];
                pair_count[base + j] += 1;
            }
        }
    }

    let half = F::from_f64_lossy(0.5);
    let threshold = task == Task::Classification && loss.thresholds_votes();
    let mut loo = Vec::with_capacity(n);
    let mut degenerate = 0usize;
    for i in 0..n {
        let base = i * n;
        let mut total = F::zero();
        let mut used = 0usize;
        for j in 0..n {
            if j == i {
                continue;
            }
            let count = pair_count[base + j];
            if count == 0 {
                degenerate += 1;
                continue;
            }
            let mut pred = pair_sum[base + j] / F::from_u32(count).unwrap();
            if threshold {
                pred = if pred > half { F::one() } else { F::zero() };
            }
            total += loss.eval(y[j], pred);
            used += 1;
        }
        if used == 0 {
            return Err(Error::Numeric(format!(
                "leave-one-out statistic for observation {i} has no usable pairs"
            )));
        }
        loo.push(total / F::from_count(used));
    }

    let total_pairs = n * (n - 1);
    let diagnostics = JabDiagnostics {
        degenerate_pairs: degenerate,
        total_pairs,
        warn_degenerate: (degenerate as f64) > 0.05 * total_pairs as f64,
    };
    Ok((loo, diagnostics))
}

/// Jackknife standard error from leave-one-out statistics:
/// sqrt((n-1)/n * sum_i (T_i - T_bar)^2).
pub fn jab_se<F: Real>(loo_errors: &[F]) -> Result<F> {
    let n = loo_errors.len();
    if n < 2 {
        return Err(Error::Input(format!("jackknife needs n >= 2, got {n}")));
    }
    let n_f = F::from_count(n);
    let mean = loo_errors.iter().fold(F::zero(), |acc, &v| acc + v) / n_f;
    let ssd = loo_errors
        .iter()
        .fold(F::zero(), |acc, &v| acc + (v - mean) * (v - mean));
    Ok(((n_f - F::one()) / n_f * ssd).sqrt())
}

/// Assemble the full report for a (P, N, y) triplet.
///
/// `loss` of `None` picks the task convention: square error for regression,
/// misclassification (majority vote) for classification. Explicit
/// differentiable losses route through the generic influence; the
/// misclassification loss routes through the two-class variant.
pub fn compute_se_report<F: Real>(
    p: &PredictionMatrix<F>,
    inbag: &InbagMatrix,
    y: &[F],
    task: Task,
    loss: Option<Loss>,
    variant: InfluenceVariant,
) -> Result<SeReport<F>> {
    let loss = loss.unwrap_or_else(|| task_loss(task));
    let oob = oob_predictions(p, inbag, task)?;

    // Aggregation fed to the loss: thresholded majority vote only for the
    // misclassification loss; otherwise the raw OOB mean (vote fraction).
    let aggregated: &[F] = if loss.thresholds_votes() {
        if task != Task::Classification {
            return Err(Error::Config(
                "misclassification loss applies to classification tasks only".into(),
            ));
        }
        &oob.pred
    } else {
        &oob.mean
    };

    let (err_oob, q) = oob_error(y, aggregated, loss)?;
    let se_naive = naive_se(&q)?;

    let influence = match loss {
        Loss::Misclassification => {
            classification_delta_influence(p, inbag, y, &oob.mean, &oob.pred, variant)?
        }
        Loss::SquareError if task == Task::Regression => {
            delta_influence(p, inbag, y, aggregated, variant)?
        }
        _ => generic_loss_influence(p, inbag, y, aggregated, loss, variant)?,
    };
    let se_delta = delta_se(&influence);
    let se_delta_plus = delta_plus_se(se_naive, se_delta);

    let (loo_errors, diagnostics) = jab_leave_one_out(p, inbag, y, task, loss)?;
    let se_jab = jab_se(&loo_errors)?;

    Ok(SeReport {
        err_oob,
        se_naive,
        se_delta,
        se_delta_plus,
        se_jab,
        influence,
        loo_errors,
        diagnostics,
    })
}
