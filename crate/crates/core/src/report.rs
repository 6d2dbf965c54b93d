//! Audit records and their canonical serialization.
//!
//! Output is bit-stable: object keys are sorted and every float is written
//! with 17 significant digits.

use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// One checked inequality: `lhs <= constant * rhs` style comparison with an
/// optional budget for the empirical constant.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub budget: Option<f64>,
    pub pass: bool,
}

impl AuditRow {
    pub fn new(label: impl Into<String>, lhs: f64, rhs: f64, constant: f64, budget: Option<f64>, pass: bool) -> Self {
        Self { label: label.into(), lhs, rhs, constant, budget, pass }
    }

    /// Row that passes iff `constant <= budget`.
    pub fn budgeted(label: impl Into<String>, lhs: f64, rhs: f64, constant: f64, budget: f64) -> Self {
        let pass = constant.is_finite() && constant <= budget;
        Self::new(label, lhs, rhs, constant, Some(budget), pass)
    }

    /// Informational row, never fails.
    pub fn info(label: impl Into<String>, lhs: f64, rhs: f64, constant: f64) -> Self {
        Self::new(label, lhs, rhs, constant, None, true)
    }
}

/// Structured record of one audit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditReport {
    pub audit: String,
    pub anchor: String,
    pub rows: Vec<AuditRow>,
    pub notes: BTreeMap<String, f64>,
    pub tags: BTreeMap<String, String>,
}

impl AuditReport {
    pub fn new(audit: impl Into<String>, anchor: impl Into<String>) -> Self {
        Self { audit: audit.into(), anchor: anchor.into(), ..Default::default() }
    }

    pub fn push(&mut self, row: AuditRow) {
        self.rows.push(row);
    }

    pub fn note(&mut self, key: impl Into<String>, value: f64) {
        self.notes.insert(key.into(), value);
    }

    pub fn tag(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.tags.insert(key.into(), value.into());
    }

    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, label: &str) -> Option<&AuditRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("audit".into(), Value::String(self.audit.clone()));
        m.insert("anchor".into(), Value::String(self.anchor.clone()));
        m.insert("pass".into(), Value::Bool(self.pass()));
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut o = Map::new();
                o.insert("label".into(), Value::String(r.label.clone()));
                o.insert("lhs".into(), num(r.lhs));
                o.insert("rhs".into(), num(r.rhs));
                o.insert("constant".into(), num(r.constant));
                o.insert("budget".into(), r.budget.map(num).unwrap_or(Value::Null));
                o.insert("pass".into(), Value::Bool(r.pass));
                Value::Object(o)
            })
            .collect();
        m.insert("rows".into(), Value::Array(rows));
        let notes = self.notes.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
        m.insert("notes".into(), Value::Object(notes));
        let tags = self.tags.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        m.insert("tags".into(), Value::Object(tags));
        Value::Object(m)
    }

    pub fn to_json(&self) -> String {
        canonical_json(&self.to_value())
    }
}

/// JSON number for finite floats, a string marker otherwise.
pub fn num(x: f64) -> Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None if x.is_nan() => Value::String("nan".into()),
        None if x > 0.0 => Value::String("inf".into()),
        None => Value::String("-inf".into()),
    }
}

/// Fixed 17-significant-digit float formatting.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Serialize with sorted keys, two-space indent and fixed float format.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&fmt_f64(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in a.iter().enumerate() {
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
                if i + 1 < a.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(o) => {
            if o.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = o.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                indent(out, depth + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &o[*k], depth + 1);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, depth);
            out.push('}');
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

/// Sweep table with a fixed column order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Float column by name; integer cells are widened.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[j] {
                    Cell::Int(i) => *i as f64,
                    Cell::Float(x) => *x,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r
                .iter()
                .map(|c| match c {
                    Cell::Int(i) => i.to_string(),
                    Cell::Float(x) => fmt_f64(*x),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_is_sorted_and_fixed_precision() {
        let mut r = AuditReport::new("demo", "anchor");
        r.push(AuditRow::budgeted("b", 0.1, 1.0, 0.1, 2.0));
        r.note("zeta", 1.0 / 3.0);
        r.note("alpha", f64::INFINITY);
        let s = r.to_json();
        assert!(s.find("\"alpha\"").unwrap() < s.find("\"zeta\"").unwrap());
        assert!(s.contains("3.3333333333333331e-1"));
        assert!(s.contains("\"inf\""));
        assert_eq!(s, r.clone().to_json());
        let parsed: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(parsed["pass"], Value::Bool(true));
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(&["m", "lhs_measure", "rhs_bound", "gamma1_fit"]);
        assert_eq!(t.to_csv(), "m,lhs_measure,rhs_bound,gamma1_fit\n");
    }
}
