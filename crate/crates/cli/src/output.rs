//! Exit codes, provenance and result emission.

use std::fmt;

use clap::ValueEnum;
use serde_json::{json, Map, Value};
use transport_core::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_UNSOLVABLE: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: msg.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Unsolvable { .. } => EXIT_UNSOLVABLE,
            e if e.is_validation() => EXIT_VALIDATION,
            _ => EXIT_NUMERIC,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Header attached to every result.
pub struct Provenance {
    pub command: &'static str,
    pub field: String,
    pub input_sha256: String,
    pub tolerances: Value,
    pub timestamp: Option<String>,
}

impl Provenance {
    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), json!("transport"));
        m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        m.insert("command".into(), json!(self.command));
        m.insert("field".into(), json!(self.field));
        m.insert("input_sha256".into(), json!(self.input_sha256));
        m.insert("tolerances".into(), self.tolerances.clone());
        if let Some(t) = &self.timestamp {
            m.insert("timestamp".into(), json!(t));
        }
        Value::Object(m)
    }

    fn csv_comment(&self) -> String {
        let mut out = format!(
            "# transport {} {}\n# field: {}\n# input_sha256: {}\n# tolerances: {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.field,
            self.input_sha256,
            self.tolerances
        );
        if let Some(t) = &self.timestamp {
            out.push_str(&format!("# timestamp: {t}\n"));
        }
        out
    }
}

/// A command result in both forms; `csv` is `None` when the command has no
/// tabular form.
pub struct Report {
    pub json: Value,
    pub csv: Option<String>,
    pub exit: u8,
    /// Printed to stderr after the result.
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(json: Value, csv: Option<String>) -> Self {
        Report {
            json,
            csv,
            exit: EXIT_OK,
            notes: Vec::new(),
        }
    }
}

pub fn render(prov: &Provenance, report: &Report, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let doc = json!({ "provenance": prov.to_json(), "result": report.json });
            let mut s = serde_json::to_string_pretty(&doc).expect("json values serialize");
            s.push('\n');
            Ok(s)
        }
        Format::Csv => match &report.csv {
            Some(body) => Ok(prov.csv_comment() + body),
            None => Err(CliError::validation(format!(
                "`{}` has no CSV output; use --output json",
                prov.command
            ))),
        },
    }
}

/// Quotes a CSV cell when needed.
pub fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
