//! Run reports and their CSV / JSON export.

use serde::{Deserialize, Serialize};

use crate::error::{PackError, Result};
use crate::framework::StepDiagnostics;
use crate::offline::Provenance;
use crate::rational::Rational;

/// Constants the run was checked against.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constants {
    pub epsilon: Rational,
    pub online: String,
    pub beta: Option<Rational>,
    pub c_on: Option<Rational>,
    pub offline: String,
    pub gamma: Option<Rational>,
    pub c_off: Option<Rational>,
    pub provenance: Option<Provenance>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub events: usize,
    pub phases: usize,
    pub max_ledger_factor: Option<Rational>,
    /// Largest `cost / lb` over events with a positive lower bound.
    pub max_cost_ratio: Option<Rational>,
    pub final_cost: Rational,
    pub bound_failures: usize,
    pub violations: usize,
    pub constants: Constants,
}

impl Summary {
    pub fn from_rows(rows: &[StepDiagnostics], constants: Constants) -> Summary {
        let max_opt = |acc: Option<Rational>, x: Option<Rational>| match (acc, x) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let mut summary = Summary {
            events: rows.len(),
            constants,
            ..Summary::default()
        };
        for row in rows {
            summary.phases += usize::from(row.phase_end);
            summary.max_ledger_factor = max_opt(summary.max_ledger_factor.take(), row.ledger_factor.clone());
            if row.lb.is_positive() {
                summary.max_cost_ratio = max_opt(summary.max_cost_ratio.take(), Some(&row.cost / &row.lb));
            }
            summary.bound_failures += usize::from(row.bound_ok == Some(false));
            summary.violations += row.violations.len();
        }
        summary.final_cost = rows.last().map(|r| r.cost.clone()).unwrap_or_default();
        summary
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<StepDiagnostics>,
    pub summary: Summary,
}

impl RunReport {
    pub fn new(rows: Vec<StepDiagnostics>, constants: Constants) -> Self {
        let summary = Summary::from_rows(&rows, constants);
        RunReport { rows, summary }
    }

    pub fn violations(&self) -> impl Iterator<Item = (u64, &str)> {
        self.rows
            .iter()
            .flat_map(|r| r.violations.iter().map(move |v| (r.t, v.as_str())))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    /// `.json` selects JSON, anything else CSV.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

pub const CSV_COLUMNS: [&str; 11] = [
    "t",
    "op",
    "id",
    "cost",
    "live_cost",
    "lb",
    "phase_end",
    "migrated",
    "ledger_factor",
    "bound",
    "bound_ok",
];

fn opt_str<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

pub fn export(report: &RunReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut bytes = serde_json::to_vec_pretty(report).map_err(|e| PackError::Parse(e.to_string()))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        Format::Csv => {
            let io = |e: csv::Error| PackError::Parse(e.to_string());
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_COLUMNS).map_err(io)?;
            for r in &report.rows {
                w.write_record([
                    r.t.to_string(),
                    r.op.clone(),
                    r.id.clone(),
                    r.cost.to_string(),
                    r.live_cost.to_string(),
                    r.lb.to_string(),
                    r.phase_end.to_string(),
                    r.migrated.to_string(),
                    opt_str(&r.ledger_factor),
                    opt_str(&r.bound),
                    opt_str(&r.bound_ok),
                ])
                .map_err(io)?;
            }
            w.into_inner().map_err(|e| PackError::Parse(e.to_string()))
        }
    }
}

pub fn import_json(bytes: &[u8]) -> Result<RunReport> {
    serde_json::from_slice(bytes).map_err(|e| PackError::Parse(e.to_string()))
}
