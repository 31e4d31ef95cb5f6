//! Random forests with out-of-bag (OOB) error, resampling-based standard
//! errors, and confidence intervals for generalization error.
//!
//! The crate grows bagged CART forests while recording the full inbag count
//! matrix, then estimates the standard error of the OOB error three ways
//! without growing any extra trees:
//!
//! * naive: treat per-observation losses as independent;
//! * delta method (infinitesimal jackknife): influence functions over the
//!   existing bootstrap replicates, with a conservative max-with-naive
//!   variant;
//! * jackknife-after-bootstrap: leave-one-out statistics recomputed by
//!   restricting the existing trees.
//!
//! Confidence intervals come from a normal approximation on the original,
//! log, or square-root scale. A Monte-Carlo harness measures interval
//! coverage against the test error of each replicate's forest on a large
//! held-out sample.
//!
//! Numeric kernels are generic over the scalar type ([`scalar::Real`], i.e.
//! `f32` or `f64`); the aliases below fix the common `f64` instantiations.
//! The estimators run on any (predictions, inbag, response) triplet, so
//! forests grown by other software can be analyzed through the
//! [`io::MatrixBundle`] interchange format.

pub mod dataset;
pub mod error;
pub mod forest;
pub mod influence;
pub mod interval;
pub mod io;
pub mod loss;
pub mod mat;
pub mod oob;
pub mod scalar;
pub mod se;
pub mod sim;
pub mod tree;
pub mod weighting;

pub use dataset::{Dataset, Task};
pub use error::{Error, Result};
pub use forest::{
    exhaustive_forest, train_forest, tree_prediction_matrix, ExhaustiveForest, ForestConfig,
    ForestModel, InbagMatrix, PredictionMatrix, ToyPredictor,
};
pub use influence::{
    classification_delta_influence, delta_influence, generic_loss_influence, InfluenceVariant,
    InfluenceVector,
};
pub use interval::{build_interval, normal_quantile, ConfidenceInterval, Method, Transform};
pub use loss::Loss;
pub use oob::{oob_error, oob_predictions, OobPredictions, OobSummary};
pub use scalar::Real;
pub use se::{
    compute_se_report, delta_plus_se, delta_se, jab_leave_one_out, jab_se, naive_se,
    JabDiagnostics, SeReport,
};
pub use sim::{
    coverage_report, generate_dataset, run_replicate, run_simulation, sd_curve, CoverageCell,
    CoverageRecord, SimConfig,
};
pub use weighting::{statistic_derivative_fd, weighted_oob_statistic};

/// `f64` instantiations of the generic types.
pub type Dataset64 = Dataset<f64>;
pub type Forest64 = ForestModel<f64>;
pub type Predictions64 = PredictionMatrix<f64>;
pub type Influence64 = InfluenceVector<f64>;
pub type SeReport64 = SeReport<f64>;
pub type Interval64 = ConfidenceInterval<f64>;

/// `f32` instantiations.
pub type Dataset32 = Dataset<f32>;
pub type Forest32 = ForestModel<f32>;
pub type Predictions32 = PredictionMatrix<f32>;
pub type Influence32 = InfluenceVector<f32>;
pub type SeReport32 = SeReport<f32>;
pub type Interval32 = ConfidenceInterval<f32>;
