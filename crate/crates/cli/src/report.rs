//! CSV, JSON and plot-data emission.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::ValueEnum;
use serde_json::{json, Value};

use crate::exit::CliError;

/// Output format of the primary report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One table cell.
#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => num(*v),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Num(v) => finite(*v),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// Shortest round-trip decimal, in scientific notation outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// `v` as JSON, with non-finite values as `null`.
pub fn finite(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Column-ordered table.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self) -> Value {
        let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
        json!({ "columns": self.header, "rows": rows })
    }
}

/// Where and how reports are written.
pub struct Emitter {
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Emitter {
    fn write_file(&self, name: &str, body: &str) -> Result<(), CliError> {
        let dir = self.out.as_ref().expect("file output needs a directory");
        fs::create_dir_all(dir).map_err(|e| CliError::io(&dir.display().to_string(), e))?;
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::io(&path.display().to_string(), e))
    }

    fn stdout(&self, body: &str) -> Result<(), CliError> {
        let mut out = std::io::stdout().lock();
        out.write_all(body.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::io("stdout", e))
    }

    /// Writes the table (if any), the summary and the plot data.
    ///
    /// With `--out`, files are `<command>.csv` or `<command>.json`,
    /// `<command>_summary.json` and `<command>.dat`. Without it, the primary
    /// report goes to stdout and, in CSV mode, the summary to stderr.
    pub fn emit(
        &self,
        command: &str,
        table: Option<&Table>,
        summary: Value,
        plot: Option<&[(f64, f64)]>,
    ) -> Result<(), CliError> {
        let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("JSON values serialize") + "\n";
        let (primary, name, side) = match (self.format, table) {
            (Format::Json, Some(t)) => {
                let mut doc = t.to_json();
                doc["summary"] = summary;
                (pretty(&doc), format!("{command}.json"), None)
            }
            (_, None) => (pretty(&summary), format!("{command}.json"), None),
            (Format::Csv, Some(t)) => (t.to_csv(), format!("{command}.csv"), Some(pretty(&summary))),
        };
        match &self.out {
            Some(_) => {
                self.write_file(&name, &primary)?;
                if let Some(s) = side {
                    self.write_file(&format!("{command}_summary.json"), &s)?;
                }
                if let Some(points) = plot {
                    let body: String = points.iter().map(|(x, y)| format!("{} {}\n", num(*x), num(*y))).collect();
                    self.write_file(&format!("{command}.dat"), &body)?;
                }
            }
            None => {
                self.stdout(&primary)?;
                if let Some(s) = side {
                    eprint!("{s}");
                }
            }
        }
        Ok(())
    }

    /// Writes auxiliary text, to a file under `--out` or to stdout.
    pub fn emit_text(&self, name: &str, body: &str) -> Result<(), CliError> {
        match &self.out {
            Some(_) => self.write_file(name, body),
            None => self.stdout(body),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.5, 1.0 / 3.0, 6.02e23, 1.5e-12, 0.0, -2.25] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1.5e-12), "1.5e-12");
    }
}
