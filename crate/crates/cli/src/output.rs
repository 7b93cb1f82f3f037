//! Bit-stable table and manifest writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

/// One table cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Missing => Value::Null,
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| ((*c).to_owned(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Writes artifacts under one output directory.
pub struct ArtifactWriter {
    directory: PathBuf,
    formats: Vec<Format>,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    pub fn create(directory: &Path, formats: &[Format]) -> Result<Self, CliError> {
        fs::create_dir_all(directory).map_err(|e| CliError::Io(format!("{}: {e}", directory.display())))?;
        Ok(ArtifactWriter {
            directory: directory.to_owned(),
            formats: formats.to_vec(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.directory.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    /// `stem.csv` and/or `stem.json`, per the selected formats.
    pub fn table(&mut self, stem: &str, table: &Table) -> Result<(), CliError> {
        for format in self.formats.clone() {
            match format {
                Format::Csv => self.write(&format!("{stem}.csv"), &table.to_csv())?,
                Format::Json => self.write(
                    &format!("{stem}.json"),
                    &(serde_json::to_string_pretty(&table.to_json()).expect("table serializes") + "\n"),
                )?,
            }
        }
        Ok(())
    }

    /// Structured records are always written as JSON.
    pub fn record<T: Serialize>(&mut self, stem: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("record serializes") + "\n";
        self.write(&format!("{stem}.json"), &text)
    }

    pub fn manifest(&mut self, command: &str, config: &ExperimentConfig) -> Result<(), CliError> {
        let manifest = serde_json::json!({
            "command": command,
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": config.solver.seed,
            "config": config,
        });
        self.record("manifest", &manifest)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
