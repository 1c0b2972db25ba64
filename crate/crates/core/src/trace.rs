//! Per-iteration records of an optimization run and their CSV form.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{config, Result};

/// Column order of the CSV trace.
pub const CSV_COLUMNS: [&str; 8] = [
    "iter",
    "objective",
    "subspace_error",
    "orth_violation",
    "grad_dual_norm",
    "step_size",
    "inner_iters",
    "elapsed_s",
];

/// Metrics of iterate `x_iter`.
///
/// `step_size` and `inner_iters` describe the step taken from `x_iter` (both
/// zero on the last record). `grad_dual_norm` is the dual norm of the exact
/// Riemannian gradient at `x_iter`. `elapsed_s` is the cumulative step-loop
/// time needed to reach `x_iter`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub subspace_error: f64,
    pub orth_violation: f64,
    pub grad_dual_norm: f64,
    pub step_size: f64,
    pub inner_iters: usize,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub label: String,
    pub records: Vec<TraceRecord>,
    pub warnings: Vec<String>,
}

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v == 0.0 {
        "0".into()
    } else {
        format!("{v:.16e}")
    }
}

impl RunTrace {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..Default::default()
        }
    }

    /// Number of steps taken (records minus the initial one).
    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn first(&self) -> Option<&TraceRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn total_time(&self) -> f64 {
        self.last().map_or(0.0, |r| r.elapsed_s)
    }

    pub fn max_orth_violation(&self) -> (usize, f64) {
        self.records
            .iter()
            .map(|r| (r.iter, r.orth_violation))
            .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        for r in &self.records {
            out.write_record([
                r.iter.to_string(),
                fmt_f64(r.objective),
                fmt_f64(r.subspace_error),
                fmt_f64(r.orth_violation),
                fmt_f64(r.grad_dual_norm),
                fmt_f64(r.step_size),
                r.inner_iters.to_string(),
                fmt_f64(r.elapsed_s),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a trace written by [`write_csv`](Self::write_csv). Columns are
    /// matched by header name; `iter` and `objective` are required, any other
    /// missing column reads as NaN (or 0 for `inner_iters`).
    pub fn read_csv<R: Read>(label: impl Into<String>, r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(iter_col), Some(obj_col)) = (col("iter"), col("objective")) else {
            return config("trace CSV needs `iter` and `objective` columns");
        };
        let optional: Vec<Option<usize>> = CSV_COLUMNS[2..].iter().map(|c| col(c)).collect();
        let mut trace = RunTrace::new(label);
        for row in rdr.records() {
            let row = row?;
            let num = |idx: Option<usize>| -> Result<f64> {
                match idx {
                    None => Ok(f64::NAN),
                    Some(i) => row[i]
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| crate::Error::Config(format!("bad number `{}`", &row[i]))),
                }
            };
            trace.records.push(TraceRecord {
                iter: row[iter_col]
                    .trim()
                    .parse()
                    .map_err(|_| crate::Error::Config(format!("bad iteration `{}`", &row[iter_col])))?,
                objective: num(Some(obj_col))?,
                subspace_error: num(optional[0])?,
                orth_violation: num(optional[1])?,
                grad_dual_norm: num(optional[2])?,
                step_size: num(optional[3])?,
                inner_iters: match optional[4] {
                    Some(i) => row[i].trim().parse().unwrap_or(0),
                    None => 0,
                },
                elapsed_s: num(optional[5])?,
            });
        }
        Ok(trace)
    }
}
