//! File formats: CSV dataset ingestion, train/test splitting, the
//! (P, N, y) matrix-bundle interchange format, model persistence, and the
//! CSV schemas for simulation records, coverage reports, and sd curves.

mod bundle;
mod csv_data;
mod model;
mod records;

pub use bundle::{export_bundle, import_bundle, MatrixBundle};
pub use csv_data::{load_csv, split_train_test};
pub use model::{load_model, save_model};
pub use records::{
    read_records, read_report, read_sd_curve, write_records, write_report, write_sd_curve,
};

/// Shortest-round-trip decimal for a float; parsing the result recovers the
/// exact bits, which the bundle and record formats rely on.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub(crate) fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}
