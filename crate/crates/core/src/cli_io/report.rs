//! Experiment reports and their files: `report.json`, `<table>.csv`, `<table>.dat`.

use crate::solver::fmt17;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

/// `lhs relation rhs`; `margin` is positive when it holds with room.
#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

impl Assertion {
    pub fn new(name: impl Into<String>, lhs: f64, relation: Relation, rhs: f64) -> Self {
        let (margin, passed) = match relation {
            Relation::Le => (rhs - lhs, lhs <= rhs),
            Relation::Lt => (rhs - lhs, lhs < rhs),
            Relation::Ge => (lhs - rhs, lhs >= rhs),
            Relation::Gt => (lhs - rhs, lhs > rhs),
        };
        Assertion {
            name: name.into(),
            lhs,
            relation,
            rhs,
            margin,
            passed,
        }
    }

    /// A boolean outcome recorded as `value >= 1`.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Assertion::new(name, if ok { 1.0 } else { 0.0 }, Relation::Ge, 1.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
    /// Blank line every `block` rows in the `.dat` file, for gnuplot `splot`.
    #[serde(skip)]
    pub block: Option<usize>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            block: None,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| fmt17(*v)).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn write_dat<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# {}", self.columns.join(" "))?;
        for (i, r) in self.rows.iter().enumerate() {
            if let Some(b) = self.block {
                if i > 0 && i % b == 0 {
                    writeln!(w)?;
                }
            }
            let cells: Vec<String> = r.iter().map(|v| fmt17(*v)).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TableEntry {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: usize,
    pub csv: String,
    pub dat: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub inputs: serde_json::Value,
    pub scalars: BTreeMap<String, f64>,
    pub tables: Vec<TableEntry>,
    pub assertions: Vec<Assertion>,
    pub passed: bool,
    /// Module reports in full.
    pub details: serde_json::Value,
    pub wall_clock_seconds: f64,
}

/// Accumulates a report while a subcommand runs.
pub struct ReportBuilder {
    name: String,
    inputs: serde_json::Value,
    scalars: BTreeMap<String, f64>,
    tables: Vec<Table>,
    assertions: Vec<Assertion>,
    details: serde_json::Map<String, serde_json::Value>,
}

impl ReportBuilder {
    pub fn new(name: &str, inputs: serde_json::Value) -> Self {
        ReportBuilder {
            name: name.into(),
            inputs,
            scalars: BTreeMap::new(),
            tables: Vec::new(),
            assertions: Vec::new(),
            details: serde_json::Map::new(),
        }
    }

    pub fn scalar(&mut self, key: impl Into<String>, v: f64) {
        self.scalars.insert(key.into(), v);
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn assert(&mut self, a: Assertion) {
        self.assertions.push(a);
    }

    pub fn detail(&mut self, key: &str, v: impl Serialize) {
        let v = serde_json::to_value(v).unwrap_or_else(|e| serde_json::Value::String(format!("unserializable: {e}")));
        self.details.insert(key.into(), v);
    }

    pub fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    /// Write all files into `dir` and return the report.
    pub fn finish(self, dir: &Path, wall_clock_seconds: f64) -> io::Result<ExperimentReport> {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for t in &self.tables {
            let csv = format!("{}.csv", t.name);
            let dat = format!("{}.dat", t.name);
            t.write_csv(io::BufWriter::new(fs::File::create(dir.join(&csv))?))?;
            t.write_dat(io::BufWriter::new(fs::File::create(dir.join(&dat))?))?;
            entries.push(TableEntry {
                name: t.name.clone(),
                columns: t.columns.clone(),
                rows: t.rows.len(),
                csv,
                dat,
            });
        }
        let report = ExperimentReport {
            name: self.name,
            inputs: self.inputs,
            scalars: self.scalars,
            tables: entries,
            passed: self.assertions.iter().all(|a| a.passed),
            assertions: self.assertions,
            details: serde_json::Value::Object(self.details),
            wall_clock_seconds,
        };
        let f = fs::File::create(report_path(dir))?;
        serde_json::to_writer_pretty(io::BufWriter::new(f), &report)?;
        Ok(report)
    }
}

pub fn report_path(dir: &Path) -> PathBuf {
    dir.join("report.json")
}
