//! CSV schemas for simulation records (one row per replicate, wide over
//! method/transform interval endpoints), coverage reports (one row per
//! cell), and sd-curve points (one row per tree count).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::interval::{Method, Transform};
use crate::sim::{CoverageCell, CoverageRecord, RecordedInterval, SdCurvePoint};

use super::{fmt_f64, parse_f64};

/// Write records as CSV. Interval columns are named
/// `<method>_<transform>_lo` / `_hi`; miscoverage flags are derivable from
/// `truth` and are reconstructed on read.
pub fn write_records(records: &[CoverageRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Input("no records to write".into()));
    }
    let keys: Vec<(Method, Transform)> = records[0]
        .intervals
        .iter()
        .map(|iv| (iv.method, iv.transform))
        .collect();

    let mut out = String::from("replicate,err_oob,truth,se_naive,se_delta,se_delta_plus,se_jab");
    for (m, t) in &keys {
        out.push_str(&format!(",{m}_{t}_lo,{m}_{t}_hi"));
    }
    out.push('\n');

    for record in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}",
            record.replicate,
            fmt_f64(record.err_oob),
            fmt_f64(record.truth),
            fmt_f64(record.se_naive),
            fmt_f64(record.se_delta),
            fmt_f64(record.se_delta_plus),
            fmt_f64(record.se_jab),
        ));
        for (m, t) in &keys {
            let iv = record
                .intervals
                .iter()
                .find(|iv| iv.method == *m && iv.transform == *t)
                .ok_or_else(|| {
                    Error::Input(format!(
                        "record {} lacks interval {m}/{t}",
                        record.replicate
                    ))
                })?;
            out.push_str(&format!(",{},{}", fmt_f64(iv.lo), fmt_f64(iv.hi)));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read records written by [`write_records`], rebuilding miscoverage flags.
pub fn read_records(path: &Path) -> Result<Vec<CoverageRecord>> {
    let raw = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let mut lines = raw.lines().filter(|l| !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Input(format!("{}: empty records file", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    const FIXED: [&str; 7] = [
        "replicate",
        "err_oob",
        "truth",
        "se_naive",
        "se_delta",
        "se_delta_plus",
        "se_jab",
    ];
    if columns.len() < FIXED.len() || columns[..FIXED.len()] != FIXED {
        return Err(Error::Input(format!(
            "{}: unexpected records header",
            path.display()
        )));
    }

    // Interval columns come in lo/hi pairs.
    let mut keys: Vec<(Method, Transform)> = Vec::new();
    let tail = &columns[FIXED.len()..];
    if tail.len() % 2 != 0 {
        return Err(Error::Input(format!(
            "{}: interval columns must pair lo/hi",
            path.display()
        )));
    }
    for pair in tail.chunks(2) {
        let lo_name = pair[0];
        let base = lo_name.strip_suffix("_lo").ok_or_else(|| {
            Error::Input(format!("{}: expected *_lo column, got {lo_name:?}", path.display()))
        })?;
        if pair[1] != format!("{base}_hi") {
            return Err(Error::Input(format!(
                "{}: column {:?} does not match {base}_hi",
                path.display(),
                pair[1]
            )));
        }
        // base is "<method>_<transform>"; method may itself contain '_'.
        let (m, t) = base.rsplit_once('_').ok_or_else(|| {
            Error::Input(format!("{}: malformed interval column {base:?}", path.display()))
        })?;
        keys.push((m.parse()?, t.parse()?));
    }

    let mut records = Vec::new();
    for (line_no, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(Error::Input(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                line_no + 1,
                fields.len(),
                columns.len()
            )));
        }
        let num = |idx: usize| -> Result<f64> {
            parse_f64(fields[idx]).ok_or_else(|| {
                Error::Input(format!(
                    "{}: row {}: bad number {:?} in column {:?}",
                    path.display(),
                    line_no + 1,
                    fields[idx],
                    columns[idx]
                ))
            })
        };
        let replicate: usize = fields[0].parse().map_err(|_| {
            Error::Input(format!("{}: row {}: bad replicate id", path.display(), line_no + 1))
        })?;
        let truth = num(2)?;
        let mut intervals = Vec::with_capacity(keys.len());
        for (k, (m, t)) in keys.iter().enumerate() {
            let lo = num(FIXED.len() + 2 * k)?;
            let hi = num(FIXED.len() + 2 * k + 1)?;
            intervals.push(RecordedInterval {
                method: *m,
                transform: *t,
                lo,
                hi,
                miscover_high: lo > truth,
                miscover_low: hi < truth,
            });
        }
        records.push(CoverageRecord {
            replicate,
            err_oob: num(1)?,
            truth,
            se_naive: num(3)?,
            se_delta: num(4)?,
            se_delta_plus: num(5)?,
            se_jab: num(6)?,
            intervals,
        });
    }
    if records.is_empty() {
        return Err(Error::Input(format!("{}: no records", path.display())));
    }
    Ok(records)
}

pub fn write_report(cells: &[CoverageCell], path: &Path) -> Result<()> {
    let mut out = String::from(
        "method,transform,replicates,miscoverage,miscoverage_high,miscoverage_low,\
         mean_width,mean_err_oob,mean_truth\n",
    );
    for cell in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            cell.method,
            cell.transform,
            cell.replicates,
            fmt_f64(cell.miscoverage),
            fmt_f64(cell.miscoverage_high),
            fmt_f64(cell.miscoverage_low),
            fmt_f64(cell.mean_width),
            fmt_f64(cell.mean_err_oob),
            fmt_f64(cell.mean_truth),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<Vec<CoverageCell>> {
    let raw = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let mut lines = raw.lines().filter(|l| !l.is_empty());
    let _header = lines
        .next()
        .ok_or_else(|| Error::Input(format!("{}: empty report", path.display())))?;
    let mut cells = Vec::new();
    for (line_no, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::Input(format!(
                "{}: row {}: expected 9 fields",
                path.display(),
                line_no + 1
            )));
        }
        let num = |idx: usize| -> Result<f64> {
            parse_f64(fields[idx])
                .ok_or_else(|| Error::Input(format!("{}: bad number", path.display())))
        };
        cells.push(CoverageCell {
            method: fields[0].parse()?,
            transform: fields[1].parse()?,
            replicates: fields[2]
                .parse()
                .map_err(|_| Error::Input(format!("{}: bad replicate count", path.display())))?,
            miscoverage: num(3)?,
            miscoverage_high: num(4)?,
            miscoverage_low: num(5)?,
            mean_width: num(6)?,
            mean_err_oob: num(7)?,
            mean_truth: num(8)?,
        });
    }
    Ok(cells)
}

pub fn write_sd_curve(points: &[SdCurvePoint], path: &Path) -> Result<()> {
    let mut out = String::from(
        "trees,sd_err_oob,ratio_naive,ratio_delta,ratio_jab,\
         ratio_se_naive,ratio_se_delta,ratio_se_jab\n",
    );
    for pt in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            pt.trees,
            fmt_f64(pt.sd_err_oob),
            fmt_f64(pt.ratio_naive),
            fmt_f64(pt.ratio_delta),
            fmt_f64(pt.ratio_jab),
            fmt_f64(pt.ratio_se_naive),
            fmt_f64(pt.ratio_se_delta),
            fmt_f64(pt.ratio_se_jab),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_sd_curve(path: &Path) -> Result<Vec<SdCurvePoint>> {
    let raw = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    let mut lines = raw.lines().filter(|l| !l.is_empty());
    let _header = lines.next();
    let mut points = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::Input(format!("{}: malformed sd-curve row", path.display())));
        }
        let num = |idx: usize| -> Result<f64> {
            parse_f64(fields[idx])
                .ok_or_else(|| Error::Input(format!("{}: bad number", path.display())))
        };
        points.push(SdCurvePoint {
            trees: fields[0]
                .parse()
                .map_err(|_| Error::Input(format!("{}: bad tree count", path.display())))?,
            sd_err_oob: num(1)?,
            ratio_naive: num(2)?,
            ratio_delta: num(3)?,
            ratio_jab: num(4)?,
            ratio_se_naive: num(5)?,
            ratio_se_delta: num(6)?,
            ratio_se_jab: num(7)?,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Task;
    use crate::sim::{run_simulation, SimConfig};

    #[test]
    fn records_round_trip_bit_exact() {
        let mut cfg = SimConfig::new(Task::Regression, 20, 2, 1.0);
        cfg.trees = 40;
        cfg.replicates = 3;
        cfg.n_test = 50;
        cfg.transforms = vec![Transform::Identity, Transform::Log];
        cfg.seed = 8;
        let records = run_simulation(&cfg).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_records(&records, &path).unwrap();
        let back = read_records(&path).unwrap();

        assert_eq!(records.len(), back.len());
        for (a, b) in records.iter().zip(&back) {
            assert_eq!(a.replicate, b.replicate);
            assert_eq!(a.err_oob.to_bits(), b.err_oob.to_bits());
            assert_eq!(a.truth.to_bits(), b.truth.to_bits());
            assert_eq!(a.se_jab.to_bits(), b.se_jab.to_bits());
            for (x, y) in a.intervals.iter().zip(&b.intervals) {
                assert_eq!(x.method, y.method);
                assert_eq!(x.transform, y.transform);
                assert_eq!(x.lo.to_bits(), y.lo.to_bits());
                assert_eq!(x.hi.to_bits(), y.hi.to_bits());
                assert_eq!(x.miscover_high, y.miscover_high);
                assert_eq!(x.miscover_low, y.miscover_low);
            }
        }
    }

    #[test]
    fn report_round_trips() {
        let mut cfg = SimConfig::new(Task::Regression, 20, 2, 1.0);
        cfg.trees = 40;
        cfg.replicates = 2;
        cfg.n_test = 50;
        cfg.seed = 8;
        let records = run_simulation(&cfg).unwrap();
        let cells = crate::sim::coverage_report(&records).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        write_report(&cells, &path).unwrap();
        let back = read_report(&path).unwrap();
        assert_eq!(cells.len(), back.len());
        assert_eq!(cells[0].method, back[0].method);
        assert_eq!(cells[0].mean_width.to_bits(), back[0].mean_width.to_bits());
    }
}
