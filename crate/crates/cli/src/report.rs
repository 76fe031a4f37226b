//! Check records, reports and the fixed-format tables written next to them.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;

/// How a check compares its value with the tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Relation {
    AtMost,
    Below,
    AtLeast,
    Within { target: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub criterion: Option<u8>,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<f64>,
}

impl Check {
    fn new(criterion: Option<u8>, name: impl Into<String>, value: f64, tolerance: f64, relation: Relation) -> Self {
        let pass = match relation {
            Relation::AtMost => value <= tolerance,
            Relation::Below => value < tolerance,
            Relation::AtLeast => value >= tolerance,
            Relation::Within { target } => (value - target).abs() <= tolerance,
        };
        Self { criterion, name: name.into(), value, tolerance, relation, pass, tail: None }
    }

    pub fn with_tail(mut self, tail: f64) -> Self {
        self.tail = Some(tail);
        self
    }
}

/// Builds checks, multiplying every absolute tolerance by `tol_scale`.
/// Bounds that are part of a statement (orders, ratios, the norm estimate)
/// are not scaled.
#[derive(Clone, Copy, Debug)]
pub struct Checker {
    pub tol_scale: f64,
}

impl Checker {
    pub fn new(tol_scale: f64) -> Self {
        Self { tol_scale }
    }

    pub fn tolerance(&self, criterion: Option<u8>, name: impl Into<String>, value: f64, tol: f64) -> Check {
        Check::new(criterion, name, value, tol * self.tol_scale, Relation::AtMost)
    }

    pub fn bound(&self, criterion: Option<u8>, name: impl Into<String>, value: f64, limit: f64) -> Check {
        Check::new(criterion, name, value, limit, Relation::AtMost)
    }

    pub fn below(&self, criterion: Option<u8>, name: impl Into<String>, value: f64, limit: f64) -> Check {
        Check::new(criterion, name, value, limit, Relation::Below)
    }

    pub fn at_least(&self, criterion: Option<u8>, name: impl Into<String>, value: f64, limit: f64) -> Check {
        Check::new(criterion, name, value, limit, Relation::AtLeast)
    }

    pub fn within(&self, criterion: Option<u8>, name: impl Into<String>, value: f64, target: f64, width: f64) -> Check {
        Check::new(criterion, name, value, width, Relation::Within { target })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Timing {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub suite: String,
    pub seed: u64,
    pub pass: bool,
    pub tol_scale: f64,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub timings: Vec<Timing>,
    pub files: Vec<String>,
}

/// A file produced next to the report.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

/// Report plus the tables and grid states of one suite run.
#[derive(Clone, Debug)]
pub struct SuiteOutput {
    pub report: ExperimentReport,
    pub artifacts: Vec<Artifact>,
}

impl SuiteOutput {
    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

/// Writes `report.json` and every artifact into `dir`.
pub fn emit_report(output: &SuiteOutput, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for a in &output.artifacts {
        fs::write(dir.join(&a.name), &a.contents)?;
    }
    let mut json = serde_json::to_vec_pretty(&output.report).map_err(io::Error::other)?;
    json.push(b'\n');
    fs::write(dir.join("report.json"), json)
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV table with a fixed header.
pub struct Table {
    header: &'static str,
    rows: Vec<String>,
}

impl Table {
    pub fn new(header: &'static str) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, fields: &[String]) {
        debug_assert_eq!(fields.len(), self.header.split(',').count());
        self.rows.push(fields.join(","));
    }

    pub fn into_artifact(self, name: &str) -> Artifact {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(self.header);
        s.push('\n');
        for r in self.rows {
            s.push_str(&r);
            s.push('\n');
        }
        Artifact { name: name.into(), contents: s.into_bytes() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_keeps_seventeen_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        let x = std::f64::consts::PI * 1e-7;
        assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn relations() {
        let c = Checker::new(10.0);
        assert!(c.tolerance(None, "a", 5e-12, 1e-12).pass);
        assert!(!c.bound(None, "b", 1.5, 1.0).pass);
        assert!(!c.below(None, "c", 1.0, 1.0).pass);
        assert!(c.within(None, "d", 2.2, 2.0, 0.3).pass);
        assert!(!c.at_least(None, "e", 0.7, 0.8).pass);
        assert!(!c.tolerance(None, "f", f64::NAN, 1.0).pass);
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new("a,b");
        t.push(&["1".into(), fmt_num(0.5)]);
        let a = t.into_artifact("x.csv");
        assert_eq!(String::from_utf8(a.contents).unwrap(), "a,b\n1,5.0000000000000000e-1\n");
    }
}
