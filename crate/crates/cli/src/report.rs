use std::fmt::Write as _;

use clap::ValueEnum;
use expfun::spec::SpecDocument;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

impl Warning {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Warning {
            code: code.to_string(),
            message: message.into(),
        }
    }

    /// Splits library notes of the form `CODE: message`; anything else is
    /// filed under `NOTE`.
    pub fn from_note(note: &str) -> Self {
        let is_code = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_');
        match note.split_once(": ") {
            Some((code, msg)) if is_code(code) => Warning::new(code, msg),
            _ if is_code(note) => Warning::new(note, ""),
            _ => Warning::new("NOTE", note),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn records(&self) -> Vec<Value> {
        self.rows
            .iter()
            .map(|r| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(r) {
                    m.insert((*c).to_string(), v.clone());
                }
                Value::Object(m)
            })
            .collect()
    }
}

/// A number cell; non-finite values become the strings `inf`, `-inf`, `nan`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
    } else if v.is_nan() {
        Value::from("nan")
    } else if v > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

pub fn text(s: impl Into<String>) -> Value {
    Value::String(s.into())
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => fmt_f64(f),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn fmt_f64(f: f64) -> String {
    let a = f.abs();
    if a == 0.0 || (1e-4..1e9).contains(&a) {
        format!("{f}")
    } else {
        format!("{f:e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub spec: SpecDocument,
    pub command: Vec<String>,
    pub results: Table,
    pub warnings: Vec<Warning>,
    /// Extra structured output that does not fit the table.
    pub details: Option<Value>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Table => self.table(),
            Format::Json => self.json(),
        }
    }

    /// Rows only, so identical runs give identical bytes.
    pub fn csv(&self) -> String {
        let mut out = self.results.columns.join(",");
        out.push('\n');
        for r in &self.results.rows {
            let fields: Vec<String> = r.iter().map(|v| csv_field(&cell(v))).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let kind = self.spec.process_kind();
        let _ = writeln!(out, "# {}", self.command.join(" "));
        match &self.spec.name {
            Some(n) => {
                let _ = writeln!(out, "# process: {n} ({kind})");
            }
            None => {
                let _ = writeln!(out, "# process: {kind}");
            }
        }
        let cells: Vec<Vec<String>> = self.results.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
        let widths: Vec<usize> = (0..self.results.columns.len())
            .map(|i| {
                cells
                    .iter()
                    .map(|r| r[i].len())
                    .chain(std::iter::once(self.results.columns[i].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |items: Vec<&str>| {
            items
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let _ = writeln!(out, "{}", line(self.results.columns.clone()));
        for r in &cells {
            let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(out, "warnings:");
            for w in &self.warnings {
                if w.message.is_empty() {
                    let _ = writeln!(out, "  {}", w.code);
                } else {
                    let _ = writeln!(out, "  {}: {}", w.code, w.message);
                }
            }
        }
        out
    }

    pub fn json(&self) -> String {
        let mut m = Map::new();
        m.insert("spec".into(), serde_json::to_value(&self.spec).expect("spec serializes"));
        m.insert("command".into(), serde_json::to_value(&self.command).expect("strings"));
        m.insert("results".into(), Value::Array(self.results.records()));
        m.insert("warnings".into(), serde_json::to_value(&self.warnings).expect("warnings"));
        if let Some(d) = &self.details {
            m.insert("details".into(), d.clone());
        }
        m.insert("wall_clock_seconds".into(), num(self.wall_clock_seconds));
        let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("json");
        s.push('\n');
        s
    }
}

trait ProcessKind {
    fn process_kind(&self) -> &'static str;
}

impl ProcessKind for SpecDocument {
    fn process_kind(&self) -> &'static str {
        use expfun::spec::ProcessSpec::*;
        match self.process {
            Homogeneous { .. } => "homogeneous",
            NonHomPoisson { .. } => "non_hom_poisson",
            TimeChangedLevy { .. } => "time_changed_levy",
            IntegratedLevy { .. } => "integrated_levy",
            GeneralIto { .. } => "general_ito",
            HittingTimeBm { .. } => "hitting_time_bm",
        }
    }
}
