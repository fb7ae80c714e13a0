use std::fmt;
use std::path::Path;

use serde::Serialize;

use super::{csv_error, Allocation, Task};
use crate::error::{Error, Result};

/// What distinguishes the rows of one report besides the method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Alpha(f64),
    Setting(u8),
    Custom,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Alpha(a) => write!(f, "{a}"),
            Label::Setting(s) => write!(f, "{s}"),
            Label::Custom => f.write_str("custom"),
        }
    }
}

/// One allocation and its scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationRow {
    pub method: Allocation,
    pub label: Label,
    /// Integral rate of each sensor, in network order.
    pub rates: Vec<u32>,
    pub total_bits: u64,
    /// Sum of utilities at the integral rates.
    pub objective: f64,
    /// Objective of the real-valued relaxation; proposed rows only.
    pub relaxed_objective: Option<f64>,
    pub predicted_mse: Option<f64>,
    pub empirical_mse: Option<f64>,
    /// Monte Carlo standard error; missing with a single run.
    pub stderr: Option<f64>,
    pub total_kl: Option<f64>,
    /// Whether any detection utility was replaced by its concave envelope.
    pub envelope_adjusted: Option<bool>,
    pub converged: bool,
}

/// Rows of an experiment in a fixed order: by label as configured, then
/// max flow before proposed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub task: Task,
    pub rows: Vec<AllocationRow>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

impl ComparisonReport {
    pub fn new(task: Task, rows: Vec<AllocationRow>) -> Self {
        ComparisonReport { task, rows }
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    /// The row for `method` under `label`.
    pub fn row(&self, method: Allocation, label: Label) -> Option<&AllocationRow> {
        self.rows.iter().find(|r| r.method == method && r.label == label)
    }

    fn header(&self) -> Vec<&'static str> {
        match self.task {
            Task::Estimation => vec![
                "method",
                "alpha",
                "total_bits",
                "objective",
                "relaxed_objective",
                "predicted_mse",
                "empirical_mse",
                "stderr",
                "converged",
                "rates",
            ],
            _ => vec![
                "method",
                "setting",
                "total_bits",
                "objective",
                "relaxed_objective",
                "total_kl",
                "envelope_adjusted",
                "converged",
                "rates",
            ],
        }
    }

    fn record(&self, row: &AllocationRow) -> Vec<String> {
        let rates = row
            .rates
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(" ");
        let mut rec = vec![
            row.method.name().to_string(),
            row.label.to_string(),
            row.total_bits.to_string(),
            row.objective.to_string(),
            opt(row.relaxed_objective),
        ];
        match self.task {
            Task::Estimation => rec.extend([
                opt(row.predicted_mse),
                opt(row.empirical_mse),
                opt(row.stderr),
            ]),
            _ => rec.extend([opt(row.total_kl), opt(row.envelope_adjusted)]),
        }
        rec.extend([row.converged.to_string(), rates]);
        rec
    }

    /// The report as CSV with a header row. Missing values read `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(self.header()).expect("in-memory write");
        for row in &self.rows {
            out.write_record(self.record(row)).expect("in-memory write");
        }
        String::from_utf8(out.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        out.write_record(self.header()).map_err(|e| csv_error(path, e))?;
        for row in &self.rows {
            out.write_record(self.record(row)).map_err(|e| csv_error(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}
