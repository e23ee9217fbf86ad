//! Data tables, their CSV/NDJSON encodings, and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::ParamFile;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Ndjson,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Ndjson => "ndjson",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
    S(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// Shortest round-trip decimal, in exponent form outside `[1e-4, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::F(v) => fmt_f64(*v),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::U(v) => Value::from(*v),
            Cell::B(v) => Value::Bool(*v),
            Cell::S(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Encoding fixed by the table itself, overriding the run format.
    pub format: Option<Format>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.to_vec(),
            rows: Vec::new(),
            format: None,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn file_name(&self, run_format: Format) -> String {
        format!("{}.{}", self.name, self.format.unwrap_or(run_format).extension())
    }
}

/// Provenance carried at the top of every data file.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub subcommand: String,
    pub params_hash: String,
    pub seed: u64,
    pub dt: Option<f64>,
}

pub fn write_table(dir: &Path, table: &Table, run_format: Format, header: &Header) -> CliResult<PathBuf> {
    let path = dir.join(table.file_name(run_format));
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| CliError::io(&path, e);
    match table.format.unwrap_or(run_format) {
        Format::Csv => {
            writeln!(w, "# subcommand: {}", header.subcommand).map_err(io)?;
            writeln!(w, "# params_hash: {}", header.params_hash).map_err(io)?;
            writeln!(w, "# seed: {}", header.seed).map_err(io)?;
            let dt = header.dt.map_or("none".to_string(), fmt_f64);
            writeln!(w, "# dt: {dt}").map_err(io)?;
            let mut cw = csv::Writer::from_writer(&mut w);
            let csv_err = |e: csv::Error| CliError::io(&path, e.into());
            cw.write_record(&table.columns).map_err(csv_err)?;
            for row in &table.rows {
                cw.write_record(row.iter().map(Cell::text)).map_err(csv_err)?;
            }
            cw.flush().map_err(io)?;
        }
        Format::Ndjson => {
            let head = serde_json::json!({ "header": header });
            writeln!(w, "{head}").map_err(io)?;
            for row in &table.rows {
                let obj: Map<String, Value> = table
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                writeln!(w, "{}", Value::Object(obj)).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(path)
}

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub seed: u64,
    pub format: Format,
    pub params_source: String,
    pub params_hash: String,
    /// Fully resolved parameters, flags applied.
    pub params: ParamFile,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.0, 1.5, -2.25e-9, 6.41e12, 1e300, 3.0e-5, 0.1 + 0.2] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1e-20), "1e-20");
    }

    #[test]
    fn ndjson_rows_keep_column_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("x", &["b", "a"]);
        t.push(vec![1.0.into(), f64::NAN.into()]);
        let header = Header {
            subcommand: "t".into(),
            params_hash: "h".into(),
            seed: 0,
            dt: None,
        };
        let path = write_table(dir.path(), &t, Format::Ndjson, &header).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), r#"{"b":1.0,"a":null}"#);
    }
}
