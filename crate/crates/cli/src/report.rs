//! Machine-readable run reports.

use crate::config::RunConfig;
use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const SCHEMA_VERSION: u32 = 1;

/// How a row takes part in the verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Counts toward the exit status.
    Check,
    /// Reported with a threshold but never fails the run.
    Diagnostic,
    /// A measured value without a threshold.
    Info,
}

/// Direction of the comparison against `tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Below,
    AtLeast,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub comparison: Comparison,
    pub pass: bool,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub laplacian: String,
    pub poisson: String,
    pub hamiltonian_field: String,
    pub trace_measure: String,
    /// Measured `c` in `C₁(F,H) − C₁(H,F) = c{F,H}` for the Wick product.
    pub wick_bracket_constant: [f64; 2],
    pub wick_bracket_residual: f64,
    pub wick_commutator_constant: f64,
    pub fedosov_nu2_coefficient: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub sections: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub conventions: Option<Conventions>,
    pub rows: Vec<Row>,
    pub pass: bool,
    /// The only field that varies between identical runs.
    pub timings: Timings,
}

/// Accumulates rows and section timings for one command.
pub struct ReportBuilder {
    command: String,
    config: RunConfig,
    pub conventions: Option<Conventions>,
    rows: Vec<Row>,
    start: Instant,
    section: Option<(String, Instant)>,
    sections: Vec<(String, f64)>,
}

impl ReportBuilder {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        ReportBuilder {
            command: command.to_string(),
            config: config.clone(),
            conventions: None,
            rows: Vec::new(),
            start: Instant::now(),
            section: None,
            sections: Vec::new(),
        }
    }

    pub fn section(&mut self, name: impl Into<String>) {
        self.close_section();
        self.section = Some((name.into(), Instant::now()));
    }

    fn close_section(&mut self) {
        if let Some((name, t)) = self.section.take() {
            self.sections.push((name, t.elapsed().as_secs_f64()));
        }
    }

    fn push(&mut self, name: String, value: f64, tolerance: Option<f64>, comparison: Comparison, role: Role) {
        let pass = match (comparison, tolerance) {
            (Comparison::Below, Some(t)) => value < t,
            (Comparison::AtLeast, Some(t)) => value >= t,
            _ => true,
        };
        self.rows.push(Row { name, value, tolerance, comparison, pass, role });
    }

    pub fn below(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.push(name.into(), value, Some(tol), Comparison::Below, Role::Check);
    }

    pub fn at_least(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.push(name.into(), value, Some(tol), Comparison::AtLeast, Role::Check);
    }

    pub fn diag_below(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.push(name.into(), value, Some(tol), Comparison::Below, Role::Diagnostic);
    }

    pub fn diag_at_least(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.push(name.into(), value, Some(tol), Comparison::AtLeast, Role::Diagnostic);
    }

    pub fn info(&mut self, name: impl Into<String>, value: f64) {
        self.push(name.into(), value, None, Comparison::None, Role::Info);
    }

    pub fn finish(mut self) -> Report {
        self.close_section();
        let pass = self.rows.iter().filter(|r| r.role == Role::Check).all(|r| r.pass);
        Report {
            schema_version: SCHEMA_VERSION,
            tool: "kflow".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            config: self.config,
            conventions: self.conventions,
            rows: self.rows,
            pass,
            timings: Timings { total_seconds: self.start.elapsed().as_secs_f64(), sections: self.sections },
        }
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One line per row, for the terminal.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let mark = match (r.role, r.pass) {
                (Role::Info, _) => "info",
                (_, true) => "ok",
                (Role::Check, false) => "FAIL",
                (Role::Diagnostic, false) => "diag-fail",
            };
            let tol = match (r.comparison, r.tolerance) {
                (Comparison::Below, Some(t)) => format!(" (< {t:.1e})"),
                (Comparison::AtLeast, Some(t)) => format!(" (>= {t:.1e})"),
                _ => String::new(),
            };
            out.push_str(&format!("{mark:<9} {} = {:.6e}{tol}\n", r.name, r.value));
        }
        out.push_str(&format!("{} {}\n", self.command, if self.pass { "PASS" } else { "FAIL" }));
        out
    }
}
