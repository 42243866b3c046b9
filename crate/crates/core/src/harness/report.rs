//! Report rows and their CSV form.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub const CSV_HEADER: &str = "experiment,label,kappa,k,measured,bound,margin,pass";

/// One check. `pass` is `margin >= -tol` for the tolerance of the check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub experiment: String,
    pub label: String,
    pub kappa: Option<f64>,
    pub k: Option<usize>,
    pub measured: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
}

impl ReportRow {
    #[allow(clippy::too_many_arguments)]
    pub fn check(
        experiment: &str,
        label: impl Into<String>,
        kappa: Option<f64>,
        k: Option<usize>,
        measured: f64,
        bound: f64,
        margin: f64,
        tol: f64,
    ) -> Self {
        ReportRow {
            experiment: experiment.to_string(),
            label: label.into(),
            kappa,
            k,
            measured,
            bound,
            margin,
            pass: margin >= -tol,
        }
    }

    /// A check that could not be carried out.
    pub fn failed(
        experiment: &str,
        label: impl Into<String>,
        kappa: Option<f64>,
        k: Option<usize>,
    ) -> Self {
        ReportRow {
            experiment: experiment.to_string(),
            label: label.into(),
            kappa,
            k,
            measured: f64::NAN,
            bound: f64::NAN,
            margin: f64::NAN,
            pass: false,
        }
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        let opt_f = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (a, b) => a.is_some().cmp(&b.is_some()),
        };
        self.experiment
            .cmp(&other.experiment)
            .then_with(|| self.label.cmp(&other.label))
            .then_with(|| opt_f(self.kappa, other.kappa))
            .then_with(|| self.k.cmp(&other.k))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    /// Free-form remarks (fit statistics and the like); not part of the CSV.
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn merge(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
        self.notes.extend(other.notes);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// Sort by experiment, label, kappa, k. The sort is stable.
    pub fn sort(&mut self) {
        self.rows.sort_by(ReportRow::canonical_cmp);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let kappa = r.kappa.map(|v| v.to_string()).unwrap_or_default();
            let k = r.k.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{:e},{:e},{:e},{}",
                csv_field(&r.experiment),
                csv_field(&r.label),
                kappa,
                k,
                r.measured,
                r.bound,
                r.margin,
                r.pass
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
