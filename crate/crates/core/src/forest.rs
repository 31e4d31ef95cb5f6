//! Bagged forests: training with recorded inbag counts, per-tree prediction
//! matrices, and an exhaustive enumeration over all n^n ordered bootstrap
//! samples with toy predictors for exact small-n checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Real;
use crate::tree::{GrowControls, Tree};

/// Per-observation, per-tree bootstrap counts. Column b holds the draw
/// counts of sample b; every column sums to n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InbagMatrix(Mat<u32>);

impl InbagMatrix {
    pub fn from_mat(m: Mat<u32>) -> Result<Self> {
        let n = m.rows() as u32;
        for b in 0..m.cols() {
            let sum: u32 = m.col(b).iter().sum();
            if sum != n {
                return Err(Error::Input(format!(
                    "inbag column {b} sums to {sum}, expected {n}"
                )));
            }
        }
        Ok(InbagMatrix(m))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn b(&self) -> usize {
        self.0.cols()
    }

    /// Draw count of observation `i` in sample `b`.
    #[inline]
    pub fn count(&self, i: usize, b: usize) -> u32 {
        self.0.at(i, b)
    }

    /// True when observation `i` is out of bag for tree `b`.
    #[inline]
    pub fn is_oob(&self, i: usize, b: usize) -> bool {
        self.0.at(i, b) == 0
    }

    pub fn col(&self, b: usize) -> &[u32] {
        self.0.col(b)
    }

    pub fn as_mat(&self) -> &Mat<u32> {
        &self.0
    }

    /// Mean draw count per observation, (1/B) sum_b N[i][b].
    pub fn mean_counts<F: Real>(&self) -> Vec<F> {
        let b_f = F::from_count(self.b());
        (0..self.n())
            .map(|i| {
                let mut sum = F::zero();
                for b in 0..self.b() {
                    sum += F::from_u32(self.count(i, b)).unwrap();
                }
                sum / b_f
            })
            .collect()
    }
}

/// Per-tree predictions on a fixed set of rows. Entry (j, b) is tree b's
/// prediction for row j; classification trees emit hard 0/1 votes.
pub type PredictionMatrix<F> = Mat<F>;

/// Forest hyperparameters. `mtry` and `min_node_size` default per task:
/// mtry = max(1, floor(p/3)) for regression and floor(sqrt(p)) for
/// classification; min_node_size = 5 for regression, 1 for classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub mtry: Option<usize>,
    pub min_node_size: Option<usize>,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl ForestConfig {
    pub fn new(trees: usize, seed: u64) -> Self {
        ForestConfig {
            trees,
            mtry: None,
            min_node_size: None,
            max_depth: None,
            seed,
        }
    }

    pub fn resolve(&self, task: Task, p: usize) -> Result<GrowControls> {
        if self.trees == 0 {
            return Err(Error::Config("tree count must be at least 1".into()));
        }
        let mtry = self.mtry.unwrap_or(match task {
            Task::Regression => (p / 3).max(1),
            Task::Classification => ((p as f64).sqrt().floor() as usize).max(1),
        });
        if mtry == 0 || mtry > p {
            return Err(Error::Config(format!(
                "mtry {mtry} must lie in [1, {p}]"
            )));
        }
        let min_node_size = self.min_node_size.unwrap_or(match task {
            Task::Regression => 5,
            Task::Classification => 1,
        });
        if min_node_size == 0 {
            return Err(Error::Config("min_node_size must be positive".into()));
        }
        if let Some(d) = self.max_depth {
            if d == 0 {
                return Err(Error::Config("max_depth must be positive".into()));
            }
        }
        Ok(GrowControls {
            mtry,
            min_node_size,
            max_depth: self.max_depth,
        })
    }
}

/// A trained forest: trees, inbag counts, and the metadata needed to
/// re-predict deterministically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel<F> {
    pub trees: Vec<Tree<F>>,
    pub inbag: InbagMatrix,
    pub config: ForestConfig,
    pub task: Task,
    pub n_features: usize,
}

impl<F: Real> ForestModel<F> {
    pub fn b(&self) -> usize {
        self.trees.len()
    }

    /// Aggregated full-forest prediction for rows of `x`: tree mean for
    /// regression, majority vote for classification (tie goes to class 0).
    pub fn predict(&self, x: &Mat<F>) -> Result<Vec<F>> {
        if x.cols() != self.n_features {
            return Err(Error::Input(format!(
                "expected {} feature columns, got {}",
                self.n_features,
                x.cols()
            )));
        }
        let b_f = F::from_count(self.b());
        let half = F::from_f64_lossy(0.5);
        Ok((0..x.rows())
            .map(|row| {
                let mut sum = F::zero();
                for tree in &self.trees {
                    sum += tree.predict_in(x, row);
                }
                let mean = sum / b_f;
                match self.task {
                    Task::Regression => mean,
                    Task::Classification => {
                        if mean > half {
                            F::one()
                        } else {
                            F::zero()
                        }
                    }
                }
            })
            .collect())
    }
}

/// Derive an independent RNG stream for tree `index` of a forest seeded with
/// `seed`. Streams are independent of scheduling, so training parallelism
/// cannot change results.
fn tree_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Grow `cfg.trees` trees on ordered with-replacement bootstrap samples of
/// size n, recording the inbag count matrix. Deterministic in
/// (data, cfg.seed) and independent of thread count.
pub fn train_forest<F: Real>(data: &Dataset<F>, cfg: &ForestConfig) -> Result<ForestModel<F>> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Config(format!(
            "training needs at least 2 observations, got {n}"
        )));
    }
    let controls = cfg.resolve(data.task(), data.p())?;

    let grown: Vec<(Tree<F>, Vec<u32>)> = (0..cfg.trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = tree_rng(cfg.seed, b as u64);
            let mut counts = vec![0u32; n];
            let mut sample = Vec::with_capacity(n);
            for _ in 0..n {
                let idx = rng.gen_range(0..n);
                counts[idx] += 1;
                sample.push(idx);
            }
            let tree = Tree::grow(data, &sample, controls, &mut rng);
            (tree, counts)
        })
        .collect();

    let mut inbag_data = Vec::with_capacity(n * cfg.trees);
    let mut trees = Vec::with_capacity(cfg.trees);
    for (tree, counts) in grown {
        inbag_data.extend_from_slice(&counts);
        trees.push(tree);
    }
    let inbag = InbagMatrix::from_mat(Mat::from_vec(n, cfg.trees, inbag_data)?)?;

    Ok(ForestModel {
        trees,
        inbag,
        config: cfg.clone(),
        task: data.task(),
        n_features: data.p(),
    })
}

/// Materialize the n x B matrix of per-tree predictions on the rows of `x`.
pub fn tree_prediction_matrix<F: Real>(
    model: &ForestModel<F>,
    x: &Mat<F>,
) -> Result<PredictionMatrix<F>> {
    if x.cols() != model.n_features {
        return Err(Error::Input(format!(
            "expected {} feature columns, got {}",
            model.n_features,
            x.cols()
        )));
    }
    let n = x.rows();
    let b = model.b();
    let columns: Vec<Vec<F>> = model
        .trees
        .par_iter()
        .map(|tree| (0..n).map(|row| tree.predict_in(x, row)).collect())
        .collect();
    let mut data = Vec::with_capacity(n * b);
    for col in columns {
        data.extend_from_slice(&col);
    }
    Mat::from_vec(n, b, data)
}

/// Toy predictors for the exhaustive enumeration. Both are deterministic
/// functions of the bootstrap sample, so small-n derivative identities hold
/// to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyPredictor {
    /// Predicts the bootstrap-sample mean of y everywhere.
    BootstrapMean,
    /// Single best-split stump on the bootstrap sample (all features
    /// considered); falls back to the sample mean / majority when no split
    /// improves impurity.
    Stump,
}

/// An enumeration of all n^n ordered bootstrap samples with a toy predictor
/// per sample; stands in for a `ForestModel` in the exact identities.
#[derive(Debug, Clone)]
pub struct ExhaustiveForest<F> {
    pub inbag: InbagMatrix,
    pub predictions: PredictionMatrix<F>,
    pub task: Task,
}

/// Maximum n for the n^n enumeration.
pub const EXHAUSTIVE_MAX_N: usize = 6;

/// Enumerate every ordered bootstrap sample (uniform weight 1/n^n each),
/// fit the toy predictor on each, and record inbag counts and the full
/// prediction matrix on the training rows.
///
/// Sample b encodes its draws in base n, most-significant digit first, so
/// the 1-based tuple (1,1,3) at n=3 is column 0*9 + 0*3 + 2 = 2.
pub fn exhaustive_forest<F: Real>(
    data: &Dataset<F>,
    predictor: ToyPredictor,
) -> Result<ExhaustiveForest<F>> {
    let n = data.n();
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::Config(format!(
            "exhaustive enumeration is limited to n <= {EXHAUSTIVE_MAX_N} (n^n samples); got n = {n}"
        )));
    }
    let b_total = n.pow(n as u32);
    let mut inbag = Mat::<u32>::zeros(n, b_total);
    let mut preds = Mat::filled(n, b_total, F::zero());

    let mut sample = vec![0usize; n];
    for b in 0..b_total {
        let mut code = b;
        for slot in (0..n).rev() {
            sample[slot] = code % n;
            code /= n;
        }
        let counts = inbag.col_mut(b);
        for &idx in &sample {
            counts[idx] += 1;
        }
        let col = preds.col_mut(b);
        predict_toy(data, predictor, &sample, col);
    }

    Ok(ExhaustiveForest {
        inbag: InbagMatrix::from_mat(inbag)?,
        predictions: preds,
        task: data.task(),
    })
}

/// Fill `out[j]` with the toy predictor's value on training row j.
fn predict_toy<F: Real>(data: &Dataset<F>, predictor: ToyPredictor, sample: &[usize], out: &mut [F]) {
    let y = data.y();
    let mean = {
        let mut s = F::zero();
        for &i in sample {
            s += y[i];
        }
        s / F::from_count(sample.len())
    };
    let half = F::from_f64_lossy(0.5);
    let aggregate = |m: F| match data.task() {
        Task::Regression => m,
        Task::Classification => {
            if m > half {
                F::one()
            } else {
                F::zero()
            }
        }
    };

    match predictor {
        ToyPredictor::BootstrapMean => {
            let v = aggregate(mean);
            out.fill(v);
        }
        ToyPredictor::Stump => {
            match best_stump(data, sample) {
                Some((feature, threshold, left_mean, right_mean)) => {
                    let xs = data.feature(feature);
                    for (j, slot) in out.iter_mut().enumerate() {
                        let m = if xs[j] <= threshold { left_mean } else { right_mean };
                        *slot = aggregate(m);
                    }
                }
                None => {
                    let v = aggregate(mean);
                    out.fill(v);
                }
            }
        }
    }
}

/// Exhaustive best stump over all features and thresholds of the sample.
/// Ties break toward the lowest feature index, then lowest threshold.
fn best_stump<F: Real>(data: &Dataset<F>, sample: &[usize]) -> Option<(usize, F, F, F)> {
    let y = data.y();
    let n = sample.len();
    let total: F = sample.iter().fold(F::zero(), |acc, &i| acc + y[i]);
    let parent = total * total / F::from_count(n);

    let mut best: Option<(usize, F, F, F, F)> = None;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for feature_idx in 0..data.p() {
        let feature = data.feature(feature_idx);
        order.clear();
        order.extend_from_slice(sample);
        order.sort_by(|&a, &b| {
            feature[a]
                .partial_cmp(&feature[b])
                .expect("finite features")
                .then(a.cmp(&b))
        });
        let mut sum_left = F::zero();
        for w in 0..n - 1 {
            let i = order[w];
            sum_left += y[i];
            let here = feature[i];
            let next = feature[order[w + 1]];
            if here == next {
                continue;
            }
            let threshold = (here + next) / F::from_f64_lossy(2.0);
            if !(threshold >= here && threshold < next) {
                continue;
            }
            let count_left = w + 1;
            let count_right = n - count_left;
            let sum_right = total - sum_left;
            let proxy = sum_left * sum_left / F::from_count(count_left)
                + sum_right * sum_right / F::from_count(count_right);
            if best.as_ref().is_none_or(|b| proxy > b.4) {
                best = Some((
                    feature_idx,
                    threshold,
                    sum_left / F::from_count(count_left),
                    sum_right / F::from_count(count_right),
                    proxy,
                ));
            }
        }
    }
    best.filter(|b| b.4 > parent)
        .map(|(f, t, l, r, _)| (f, t, l, r))
}
