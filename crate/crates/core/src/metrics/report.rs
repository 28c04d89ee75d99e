//! Long-format metric tables.
//!
//! One row per `(patient, condition, block, leg, metric)`. `block` is the
//! 1-based training block, or `mean` for the cross-block aggregate. Values
//! are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::TTestResult;
use crate::error::{Error, Result};

pub const MEAN_BLOCK: &str = "mean";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub patient: String,
    pub condition: String,
    pub block: String,
    pub leg: String,
    pub metric: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub rows: Vec<MetricRow>,
}

impl MetricsReport {
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        patient: &str,
        condition: &str,
        block: impl ToString,
        leg: &str,
        metric: &str,
        value: f64,
        unit: &str,
    ) {
        self.rows.push(MetricRow {
            patient: patient.into(),
            condition: condition.into(),
            block: block.to_string(),
            leg: leg.into(),
            metric: metric.into(),
            value,
            unit: unit.into(),
        });
    }

    pub fn extend(&mut self, other: MetricsReport) {
        self.rows.extend(other.rows);
    }

    pub fn conditions(&self) -> Vec<String> {
        let mut c: Vec<String> = self.rows.iter().map(|r| r.condition.clone()).collect();
        c.sort();
        c.dedup();
        c
    }

    /// Cross-block means keyed by `(metric, leg, patient)`, per condition.
    pub fn means_by_condition(&self) -> BTreeMap<String, BTreeMap<(String, String, String), f64>> {
        let mut out: BTreeMap<String, BTreeMap<_, _>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.block == MEAN_BLOCK) {
            out.entry(r.condition.clone())
                .or_default()
                .insert((r.metric.clone(), r.leg.clone(), r.patient.clone()), r.value);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_rows(path, &self.rows)
    }

    pub fn read_csv(path: &Path) -> Result<MetricsReport> {
        Ok(MetricsReport { rows: read_rows(path)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRow {
    pub metric: String,
    pub leg: String,
    pub condition_a: String,
    pub condition_b: String,
    pub n_pairs: usize,
    pub mean_difference: f64,
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub degenerate: bool,
}

impl TTestRow {
    pub fn new(metric: &str, leg: &str, a: &str, b: &str, r: &TTestResult) -> Self {
        TTestRow {
            metric: metric.into(),
            leg: leg.into(),
            condition_a: a.into(),
            condition_b: b.into(),
            n_pairs: r.n_pairs,
            mean_difference: r.mean_difference,
            t: r.t_statistic,
            df: r.degrees_of_freedom,
            p: r.p_value,
            degenerate: r.degenerate,
        }
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_to_io(path, e))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a headed CSV table. Errors name the file and the 1-based line.
pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_to_io(path, e))?;
    let mut out = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        let rec: T = rec.map_err(|e| Error::Malformed {
            path: path.to_owned(),
            row: e.position().map_or(i + 2, |p| p.line() as usize),
            message: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        out.push(rec);
    }
    Ok(out)
}

fn csv_to_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Malformed {
            path: path.to_owned(),
            row: 0,
            message: format!("{other:?}"),
        },
    }
}
