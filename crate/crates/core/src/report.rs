//! Experiment records: JSON (`report_v1`) plus plot-ready CSV tables.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::stats::LineFit;

pub const SCHEMA: &str = "report_v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    /// Series the point belongs to, e.g. `"ks"` or `"variance"`.
    pub label: String,
    pub x: f64,
    pub stat: f64,
    /// Half-width of the confidence interval; zero for exact values.
    pub ci: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl From<LineFit> for Fitted {
    fn from(f: LineFit) -> Self {
        Self { slope: f.slope, intercept: f.intercept, r2: f.r2.clamp(0.0, 1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub test_name: String,
    pub params: BTreeMap<String, Value>,
    pub eps_grid: Vec<f64>,
    pub points: Vec<Point>,
    pub fitted: Option<Fitted>,
    /// The rule `pass` was decided by, in words.
    pub rule: String,
    pub pass: bool,
    pub notes: Vec<String>,
    pub runtime_s: f64,
}

impl ExperimentReport {
    pub fn new(test_name: impl Into<String>) -> Self {
        Self {
            schema: SCHEMA.into(),
            test_name: test_name.into(),
            params: BTreeMap::new(),
            eps_grid: Vec::new(),
            points: Vec::new(),
            fitted: None,
            rule: String::new(),
            pass: false,
            notes: Vec::new(),
            runtime_s: 0.0,
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn push(&mut self, label: &str, x: f64, stat: f64, ci: f64) {
        self.points.push(Point { label: label.into(), x, stat, ci: ci.abs() });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Points of one series in insertion order.
    pub fn series(&self, label: &str) -> Vec<&Point> {
        self.points.iter().filter(|p| p.label == label).collect()
    }

    pub fn stat(&self, label: &str) -> Option<f64> {
        self.points.iter().find(|p| p.label == label).map(|p| p.stat)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `label,x,stat,ci` rows; timing is left out so reruns compare equal.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "label,x,stat,ci")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", csv_field(&p.label), p.x, p.stat, p.ci)?;
        }
        Ok(())
    }
}

/// Quotes a field when RFC 4180 requires it.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One column per series of per-path values, rows by path index.
pub fn write_columns<W: Write>(mut w: W, names: &[&str], columns: &[Vec<f64>]) -> Result<()> {
    let header: Vec<String> = names.iter().map(|n| csv_field(n)).collect();
    writeln!(w, "path,{}", header.join(","))?;
    let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
    for i in 0..rows {
        let cells: Vec<String> = columns.iter().map(|c| c.get(i).map(|v| v.to_string()).unwrap_or_default()).collect();
        writeln!(w, "{i},{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut r = ExperimentReport::new("demo").param("h", 0.7).param("m", 2);
        r.push("ks", 1e-3, 0.02, 0.0);
        r.fitted = Some(Fitted { slope: 1.6, intercept: 0.1, r2: 0.99 });
        r.pass = true;
        let back = ExperimentReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.schema, SCHEMA);
        assert_eq!(back.stat("ks"), Some(0.02));
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
        let mut r = ExperimentReport::new("demo");
        r.push("var,t", 1.0, 2.0, -0.5);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "label,x,stat,ci\n\"var,t\",1,2,0.5\n");
    }

    #[test]
    fn ragged_columns() {
        let mut buf = Vec::new();
        write_columns(&mut buf, &["a", "b"], &[vec![1.0, 2.0], vec![3.0]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "path,a,b\n0,1,3\n1,2,\n");
    }
}
