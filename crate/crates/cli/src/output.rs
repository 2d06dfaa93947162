//! Canonical report serialization. The JSON body is deterministic given the
//! scenario and seed (field order fixed by struct definitions, no timing
//! data inside); wall-clock timings go to stderr only.

use serde::Serialize;

use bvflow_core::report::CheckRecord;

use crate::scenario::ScenarioFile;

#[derive(Debug, Serialize)]
pub struct ReportCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub truncated: bool,
}

#[derive(Debug, Serialize)]
pub struct Report {
    /// Echo of the fully resolved scenario: re-running it reproduces this
    /// report byte for byte in exact mode.
    pub scenario: ScenarioFile,
    pub checks: Vec<ReportCheck>,
    pub pass: bool,
    pub truncated: bool,
}

impl Report {
    pub fn new(scenario: ScenarioFile, records: Vec<CheckRecord>) -> Self {
        let pass = records.iter().all(|r| r.pass);
        let truncated = records.iter().any(|r| r.truncated);
        let checks = records
            .into_iter()
            .map(|r| ReportCheck {
                name: r.name,
                residual: r.residual,
                tolerance: r.tolerance,
                pass: r.pass,
                truncated: r.truncated,
            })
            .collect();
        Self {
            scenario,
            checks,
            pass,
            truncated,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,residual,tolerance,pass,truncated\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.name, c.residual, c.tolerance, c.pass, c.truncated
            ));
        }
        out
    }
}

/// Trajectory rows for the evolve command: scale, series power, monomial
/// exponents (space-separated), coefficient literal.
pub fn trajectory_csv(rows: &[(String, usize, String, String)]) -> String {
    let mut out = String::from("t,hbar_order,monomial,coefficient\n");
    for (t, order, monomial, coeff) in rows {
        out.push_str(&format!("{t},{order},{monomial},{coeff}\n"));
    }
    out
}
