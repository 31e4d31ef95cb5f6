//! Monte-Carlo harness: synthetic data generation, replicated coverage
//! experiments, and the standard-error-versus-tree-count curve.
//!
//! Per replicate the harness draws a fresh training set, fits one forest,
//! computes the out-of-bag error with all standard errors, and forms the
//! requested intervals. "Truth" is the full-forest test error on a large
//! independent test set. An interval miscoveres high when its lower
//! endpoint exceeds the truth and low when its upper endpoint falls below.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::forest::{train_forest, tree_prediction_matrix, ForestConfig};
use crate::influence::InfluenceVariant;
use crate::interval::{build_interval, ConfidenceInterval, Method, Transform};
use crate::mat::Mat;
use crate::se::compute_se_report;
use crate::weighting::task_loss;

/// Experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub task: Task,
    pub n: usize,
    pub p: usize,
    pub snr: f64,
    /// Marginal P(y = 1) for classification data.
    pub base_rate: f64,
    /// Trees per forest.
    pub trees: usize,
    /// Replicates.
    pub replicates: usize,
    pub n_test: usize,
    pub alpha: f64,
    pub transforms: Vec<Transform>,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(task: Task, n: usize, p: usize, snr: f64) -> Self {
        SimConfig {
            task,
            n,
            p,
            snr,
            base_rate: 0.25,
            trees: 1000,
            replicates: 100,
            n_test: 11_000,
            alpha: 0.10,
            transforms: vec![Transform::Identity],
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 1 {
            return Err(Error::Config("simulation needs n >= 2 and p >= 1".into()));
        }
        if self.snr < 0.0 {
            return Err(Error::Config("snr must be nonnegative".into()));
        }
        if !(0.0 < self.base_rate && self.base_rate < 1.0) {
            return Err(Error::Config("base_rate must lie in (0, 1)".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("at least one replicate is required".into()));
        }
        if self.n_test < 2 {
            return Err(Error::Config("n_test must be at least 2".into()));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1)".into()));
        }
        if self.transforms.is_empty() {
            return Err(Error::Config("at least one transform is required".into()));
        }
        Ok(())
    }
}

/// One interval of a replicate, with its miscoverage typing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedInterval {
    pub method: Method,
    pub transform: Transform,
    pub lo: f64,
    pub hi: f64,
    pub miscover_high: bool,
    pub miscover_low: bool,
}

/// One replicate's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub replicate: usize,
    pub err_oob: f64,
    pub truth: f64,
    pub se_naive: f64,
    pub se_delta: f64,
    pub se_delta_plus: f64,
    pub se_jab: f64,
    pub intervals: Vec<RecordedInterval>,
}

/// Aggregated coverage for one (method, transform) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageCell {
    pub method: Method,
    pub transform: Transform,
    pub replicates: usize,
    pub miscoverage: f64,
    pub miscoverage_high: f64,
    pub miscoverage_low: f64,
    pub mean_width: f64,
    pub mean_err_oob: f64,
    pub mean_truth: f64,
}

/// Derive a child seed for a purpose and index; splitmix64 over the mixed
/// words keeps replicate and tree streams unrelated.
pub fn derive_seed(master: u64, purpose: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(purpose.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const PURPOSE_DATA: u64 = 1;
const PURPOSE_FOREST: u64 = 2;

/// Draw a train/test pair from the synthetic generator.
///
/// Features are i.i.d. standard normal. Regression: y = X beta + noise with
/// s = min(5, p) equal nonzero coefficients scaled so Var(X beta) = snr and
/// unit-variance normal noise. Classification: y = 1{X beta + noise > t}
/// with t chosen so the marginal P(y = 1) equals `base_rate`.
pub fn generate_dataset(
    cfg: &SimConfig,
    seed: u64,
) -> Result<(Dataset<f64>, Dataset<f64>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = cfg.p.min(5);
    let coef = if cfg.snr > 0.0 {
        (cfg.snr / support as f64).sqrt()
    } else {
        0.0
    };

    let threshold = if cfg.task == Task::Classification {
        let sd = (1.0 + cfg.snr).sqrt();
        sd * crate::interval::normal_quantile(1.0 - cfg.base_rate)?
    } else {
        0.0
    };

    let mut draw = |n: usize| -> Result<Dataset<f64>> {
        let mut data = vec![0.0f64; n * cfg.p];
        for v in data.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let x = Mat::from_vec(n, cfg.p, data)?;
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let mut signal = 0.0;
            for j in 0..support {
                signal += coef * x.at(i, j);
            }
            let noise: f64 = rng.sample(StandardNormal);
            let latent = signal + noise;
            y.push(match cfg.task {
                Task::Regression => latent,
                Task::Classification => {
                    if latent > threshold {
                        1.0
                    } else {
                        0.0
                    }
                }
            });
        }
        Dataset::new(x, y, cfg.task)
    };

    let train = draw(cfg.n)?;
    let test = draw(cfg.n_test)?;
    Ok((train, test))
}

/// Fit one forest on `train`, evaluate truth on `test`, and record every
/// requested interval. Exposed separately from `run_replicate` so crafted
/// datasets (constant responses, fixtures) can drive the same pipeline.
pub fn evaluate_replicate(
    train: &Dataset<f64>,
    test: &Dataset<f64>,
    cfg: &SimConfig,
    replicate: usize,
    forest_seed: u64,
) -> Result<CoverageRecord> {
    let mut forest_cfg = ForestConfig::new(cfg.trees, forest_seed);
    forest_cfg.max_depth = None;
    let model = train_forest(train, &forest_cfg)?;
    let p = tree_prediction_matrix(&model, train.x())?;

    let report = compute_se_report(
        &p,
        &model.inbag,
        train.y(),
        cfg.task,
        None,
        InfluenceVariant::SampleAverage,
    )
    .map_err(|e| Error::Replicate {
        replicate,
        source: Box::new(e),
    })?;

    let loss = task_loss(cfg.task);
    let test_pred = model.predict(test.x())?;
    let truth = test
        .y()
        .iter()
        .zip(&test_pred)
        .map(|(&a, &b)| loss.eval(a, b))
        .sum::<f64>()
        / test.n() as f64;

    let ses = [
        (Method::Naive, report.se_naive),
        (Method::Delta, report.se_delta),
        (Method::DeltaPlus, report.se_delta_plus),
        (Method::Jab, report.se_jab),
    ];
    let mut intervals = Vec::with_capacity(ses.len() * cfg.transforms.len());
    for &(method, se) in &ses {
        for &transform in &cfg.transforms {
            let ci = build_interval(report.err_oob, se, cfg.alpha, method, transform)?;
            intervals.push(recorded(&ci, truth));
        }
    }

    Ok(CoverageRecord {
        replicate,
        err_oob: report.err_oob,
        truth,
        se_naive: report.se_naive,
        se_delta: report.se_delta,
        se_delta_plus: report.se_delta_plus,
        se_jab: report.se_jab,
        intervals,
    })
}

fn recorded(ci: &ConfidenceInterval<f64>, truth: f64) -> RecordedInterval {
    RecordedInterval {
        method: ci.method,
        transform: ci.transform,
        lo: ci.lo,
        hi: ci.hi,
        miscover_high: ci.lo > truth,
        miscover_low: ci.hi < truth,
    }
}

/// One replicate end to end: fresh data, one forest, one record.
pub fn run_replicate(cfg: &SimConfig, replicate: usize) -> Result<CoverageRecord> {
    cfg.validate()?;
    let data_seed = derive_seed(cfg.seed, PURPOSE_DATA, replicate as u64);
    let forest_seed = derive_seed(cfg.seed, PURPOSE_FOREST, replicate as u64);
    let (train, test) = generate_dataset(cfg, data_seed)?;
    evaluate_replicate(&train, &test, cfg, replicate, forest_seed)
}

/// All replicates, parallel over replicate index with a deterministic
/// collection order.
pub fn run_simulation(cfg: &SimConfig) -> Result<Vec<CoverageRecord>> {
    cfg.validate()?;
    (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, r))
        .collect()
}

/// Aggregate records into the per-(method, transform) coverage table.
pub fn coverage_report(records: &[CoverageRecord]) -> Result<Vec<CoverageCell>> {
    if records.is_empty() {
        return Err(Error::Input("coverage report needs at least one record".into()));
    }
    let mut keys: Vec<(Method, Transform)> = Vec::new();
    for iv in &records[0].intervals {
        keys.push((iv.method, iv.transform));
    }
    let r = records.len() as f64;
    let mean_err = records.iter().map(|c| c.err_oob).sum::<f64>() / r;
    let mean_truth = records.iter().map(|c| c.truth).sum::<f64>() / r;

    let mut cells = Vec::with_capacity(keys.len());
    for (method, transform) in keys {
        let mut high = 0usize;
        let mut low = 0usize;
        let mut width = 0.0f64;
        let mut count = 0usize;
        for record in records {
            let iv = record
                .intervals
                .iter()
                .find(|iv| iv.method == method && iv.transform == transform)
                .ok_or_else(|| {
                    Error::Input(format!(
                        "record {} lacks interval {method}/{transform}",
                        record.replicate
                    ))
                })?;
            high += iv.miscover_high as usize;
            low += iv.miscover_low as usize;
            width += iv.hi - iv.lo;
            count += 1;
        }
        cells.push(CoverageCell {
            method,
            transform,
            replicates: count,
            miscoverage: (high + low) as f64 / count as f64,
            miscoverage_high: high as f64 / count as f64,
            miscoverage_low: low as f64 / count as f64,
            mean_width: width / count as f64,
            mean_err_oob: mean_err,
            mean_truth,
        });
    }
    Ok(cells)
}

/// One grid point of the stabilization curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdCurvePoint {
    pub trees: usize,
    /// Empirical SD of the OOB error over replicates.
    pub sd_err_oob: f64,
    pub ratio_naive: f64,
    pub ratio_delta: f64,
    pub ratio_jab: f64,
    /// Monte-Carlo standard errors of the ratios (SD of per-replicate
    /// ratios over sqrt(R)).
    pub ratio_se_naive: f64,
    pub ratio_se_delta: f64,
    pub ratio_se_jab: f64,
}

/// For each tree count in `b_grid`, run `cfg.replicates` fresh replicates
/// and report mean(SE estimate) / SD(ErrOOB) per method.
pub fn sd_curve(cfg: &SimConfig, b_grid: &[usize]) -> Result<Vec<SdCurvePoint>> {
    cfg.validate()?;
    if cfg.replicates < 2 {
        return Err(Error::Input(
            "the sd curve needs at least 2 replicates to estimate SD(ErrOOB)".into(),
        ));
    }
    if b_grid.is_empty() {
        return Err(Error::Config("empty tree-count grid".into()));
    }
    if b_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("tree-count grid must be strictly ascending".into()));
    }

    let mut points = Vec::with_capacity(b_grid.len());
    for (gi, &b) in b_grid.iter().enumerate() {
        let mut sub = cfg.clone();
        sub.trees = b;
        // Distinct data per grid point, deterministic in (seed, grid index).
        sub.seed = derive_seed(cfg.seed, 3, gi as u64);
        let records = run_simulation(&sub)?;
        let r = records.len() as f64;
        let mean_err = records.iter().map(|c| c.err_oob).sum::<f64>() / r;
        let var_err = records
            .iter()
            .map(|c| (c.err_oob - mean_err).powi(2))
            .sum::<f64>()
            / (r - 1.0);
        let sd_err = var_err.sqrt();
        if sd_err == 0.0 {
            return Err(Error::Numeric(
                "OOB error is constant across replicates; ratio undefined".into(),
            ));
        }
        let stats = |extract: fn(&CoverageRecord) -> f64| -> (f64, f64) {
            let ratios: Vec<f64> = records.iter().map(|c| extract(c) / sd_err).collect();
            let mean = ratios.iter().sum::<f64>() / r;
            let var = ratios.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
            (mean, (var / r).sqrt())
        };
        let (ratio_naive, ratio_se_naive) = stats(|c| c.se_naive);
        let (ratio_delta, ratio_se_delta) = stats(|c| c.se_delta);
        let (ratio_jab, ratio_se_jab) = stats(|c| c.se_jab);
        points.push(SdCurvePoint {
            trees: b,
            sd_err_oob: sd_err,
            ratio_naive,
            ratio_delta,
            ratio_jab,
            ratio_se_naive,
            ratio_se_delta,
            ratio_se_jab,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> SimConfig {
        let mut cfg = SimConfig::new(Task::Regression, 25, 3, 2.0);
        cfg.trees = 60;
        cfg.replicates = 3;
        cfg.n_test = 200;
        cfg.transforms = vec![Transform::Identity, Transform::Log, Transform::Sqrt];
        cfg.seed = 42;
        cfg
    }

    #[test]
    fn replicates_are_deterministic() {
        let cfg = tiny_cfg();
        let a = run_replicate(&cfg, 1).unwrap();
        let b = run_replicate(&cfg, 1).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn delta_plus_interval_contains_the_naive_interval() {
        let cfg = tiny_cfg();
        let record = run_replicate(&cfg, 0).unwrap();
        let find = |m: Method| {
            record
                .intervals
                .iter()
                .find(|iv| iv.method == m && iv.transform == Transform::Identity)
                .unwrap()
        };
        let naive = find(Method::Naive);
        let plus = find(Method::DeltaPlus);
        assert!(plus.lo <= naive.lo && naive.hi <= plus.hi);
    }

    #[test]
    fn constant_response_pipeline_degenerates_cleanly() {
        let x_rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let train = Dataset::from_rows(&x_rows, vec![2.0; 20], Task::Regression).unwrap();
        let test = Dataset::from_rows(&x_rows, vec![2.0; 20], Task::Regression).unwrap();
        let mut cfg = tiny_cfg();
        cfg.transforms = vec![Transform::Identity, Transform::Sqrt];
        let record = evaluate_replicate(&train, &test, &cfg, 0, 7).unwrap();
        assert_eq!(record.err_oob, 0.0);
        assert_eq!(record.truth, 0.0);
        for iv in &record.intervals {
            assert_eq!(iv.lo, 0.0);
            assert_eq!(iv.hi, 0.0);
            assert!(!iv.miscover_high && !iv.miscover_low);
        }
    }

    #[test]
    fn classification_base_rate_is_respected() {
        let mut cfg = SimConfig::new(Task::Classification, 3000, 4, 0.0);
        cfg.n_test = 100;
        cfg.trees = 1;
        let (train, _) = generate_dataset(&cfg, 99).unwrap();
        let rate = train.y().iter().sum::<f64>() / train.n() as f64;
        assert!((rate - 0.25).abs() < 0.03, "empirical base rate {rate}");
    }

    #[test]
    fn coverage_report_counts_flag_types() {
        let mk = |high: bool, low: bool| CoverageRecord {
            replicate: 0,
            err_oob: 1.0,
            truth: 1.0,
            se_naive: 0.1,
            se_delta: 0.1,
            se_delta_plus: 0.1,
            se_jab: 0.1,
            intervals: vec![RecordedInterval {
                method: Method::Naive,
                transform: Transform::Identity,
                lo: 0.9,
                hi: 1.1,
                miscover_high: high,
                miscover_low: low,
            }],
        };
        let records = vec![mk(true, false), mk(false, true), mk(false, false), mk(false, false)];
        let cells = coverage_report(&records).unwrap();
        assert_eq!(cells.len(), 1);
        assert!((cells[0].miscoverage - 0.5).abs() < 1e-15);
        assert!((cells[0].miscoverage_high - 0.25).abs() < 1e-15);
        assert!((cells[0].miscoverage_low - 0.25).abs() < 1e-15);

        assert!(coverage_report(&[]).is_err());
    }

    #[test]
    fn miscoverage_flags_are_mutually_exclusive() {
        let cfg = tiny_cfg();
        for r in 0..3 {
            let record = run_replicate(&cfg, r).unwrap();
            for iv in &record.intervals {
                assert!(!(iv.miscover_high && iv.miscover_low));
            }
        }
    }

    #[test]
    fn sd_curve_needs_two_replicates_and_an_ascending_grid() {
        let mut cfg = tiny_cfg();
        cfg.replicates = 1;
        assert!(sd_curve(&cfg, &[10, 20]).is_err());
        cfg.replicates = 2;
        assert!(sd_curve(&cfg, &[20, 10]).is_err());
    }

    #[test]
    fn sd_curve_ratios_are_nonnegative() {
        let mut cfg = tiny_cfg();
        cfg.replicates = 3;
        cfg.trees = 40;
        cfg.n_test = 100;
        let points = sd_curve(&cfg, &[30, 60]).unwrap();
        for pt in points {
            assert!(pt.ratio_naive >= 0.0);
            assert!(pt.ratio_delta >= 0.0);
            assert!(pt.ratio_jab >= 0.0);
        }
    }
}
