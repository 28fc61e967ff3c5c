//! Trajectory and table writers.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::Format;
use crate::error::CliError;
use crate::run::RunOutput;

/// 17 significant digits, so values round-trip exactly.
pub fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn json_number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// A rectangular table of numbers with an optional leading text column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<(Option<String>, Vec<f64>)>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, label: Option<String>, values: Vec<f64>) {
        self.rows.push((label, values));
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = self.columns.join(",");
                s.push('\n');
                for (label, values) in &self.rows {
                    let mut fields: Vec<String> = label.iter().cloned().collect();
                    fields.extend(values.iter().map(|&v| number(v)));
                    s.push_str(&fields.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|(label, values)| {
                        let mut r: Vec<Value> = label.iter().map(|l| Value::String(l.clone())).collect();
                        r.extend(values.iter().map(|&v| json_number(v)));
                        Value::Array(r)
                    })
                    .collect();
                let mut s = serde_json::to_string_pretty(&json!({ "columns": self.columns, "rows": rows }))
                    .expect("table serializes");
                s.push('\n');
                s
            }
        }
    }
}

pub fn render_trajectory(out: &RunOutput, format: Format) -> String {
    let mut columns = vec!["t".to_string(), "regime".to_string()];
    columns.extend(out.state_names.iter().cloned());
    columns.push("lambda".into());
    match format {
        Format::Csv => {
            let mut s = columns.join(",");
            s.push('\n');
            for r in &out.rows {
                write!(s, "{},{}", number(r.t), r.regime).unwrap();
                for &v in &r.x {
                    write!(s, ",{}", number(v)).unwrap();
                }
                writeln!(s, ",{}", number(r.lambda)).unwrap();
            }
            s
        }
        Format::Json => {
            let rows: Vec<Value> = out
                .rows
                .iter()
                .map(|r| {
                    let mut v = vec![json_number(r.t), Value::String(r.regime.into())];
                    v.extend(r.x.iter().map(|&x| json_number(x)));
                    v.push(json_number(r.lambda));
                    Value::Array(v)
                })
                .collect();
            let transitions: Vec<Value> =
                out.events.iter().map(|e| json!({ "t": json_number(e.t), "kind": e.kind })).collect();
            let mut s = serde_json::to_string_pretty(&json!({
                "columns": columns,
                "rows": rows,
                "transitions": transitions,
            }))
            .expect("trajectory serializes");
            s.push('\n');
            s
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}
