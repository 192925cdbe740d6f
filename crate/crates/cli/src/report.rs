use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// A tolerance check whose failure turns the exit code to 1.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= tol`.
    pub fn at_most(name: &str, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
            pass: value <= tol,
        }
    }

    /// Passes when the flag holds; `value` is 1 or 0.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tol: 1.0,
            pass: ok,
        }
    }
}

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.into(),
                    Cell::Num(v) => format!("{v:?}"),
                    Cell::Int(v) => v.to_string(),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// What a subcommand produces before serialization.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub values: Value,
    pub table: Option<Table>,
    pub checks: Vec<Check>,
    /// Preformatted CSV that replaces `table` (wide curve tables).
    pub raw_csv: Option<String>,
}

impl Outcome {
    pub fn new(values: impl Serialize) -> Self {
        Self {
            values: serde_json::to_value(values).expect("plain data serializes"),
            table: None,
            checks: Vec::new(),
            raw_csv: None,
        }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn with_checks(mut self, checks: Vec<Check>) -> Self {
        self.checks = checks;
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    schema_version: u32,
    command: &'a str,
    inputs_hash: &'a str,
    values: &'a Value,
    checks: &'a [Check],
    passed: bool,
}

/// Hex SHA-256 of the canonical JSON of the inputs.
pub fn inputs_hash(inputs: &impl Serialize) -> String {
    let canonical = serde_json::to_string(inputs).expect("plain data serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn checks_csv(checks: &[Check]) -> String {
    let mut out = String::from("check,value,tol,pass\n");
    for c in checks {
        let _ = writeln!(out, "{},{:?},{:?},{}", c.name, c.value, c.tol, c.pass);
    }
    out
}

pub fn render_json(command: &str, hash: &str, outcome: &Outcome) -> String {
    let record = JsonRecord {
        schema_version: SCHEMA_VERSION,
        command,
        inputs_hash: hash,
        values: &outcome.values,
        checks: &outcome.checks,
        passed: outcome.passed(),
    };
    let mut s = serde_json::to_string_pretty(&record).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn render_csv(outcome: &Outcome) -> String {
    if let Some(raw) = &outcome.raw_csv {
        return raw.clone();
    }
    match &outcome.table {
        Some(t) => t.to_csv(),
        None => checks_csv(&outcome.checks),
    }
}

pub fn emit(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}
