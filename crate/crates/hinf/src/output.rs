//! CSV tables and run manifests.
//!
//! Every CSV starts with a header row; column names carry their unit as a
//! suffix (`_s`, `_m`, `_rad`, `_m_s2`, ...) and are otherwise
//! dimensionless.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest text that parses back to the same `f64`, in plain notation for
/// moderate magnitudes and scientific notation otherwise.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A table that is written in one go.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width differs from the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(Error::io(path))
    }
}

/// `config` followed by a `[run]` table holding the results.
pub fn write_manifest(path: &Path, config: &impl Serialize, run: toml::Table) -> Result<()> {
    let mut table = toml::Table::try_from(config)?;
    table.insert("run".into(), toml::Value::Table(run));
    std::fs::write(path, toml::to_string(&table)?).map_err(Error::io(path))
}

/// Start of a `[run]` table: command and crate versions.
pub fn run_record(command: &str) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("command".into(), command.into());
    t.insert("hinf_version".into(), env!("CARGO_PKG_VERSION").into());
    t.insert("hinf_core_version".into(), hinf_core::VERSION.into());
    t
}

pub fn floats(values: impl IntoIterator<Item = f64>) -> toml::Value {
    toml::Value::Array(values.into_iter().map(toml::Value::from).collect())
}
