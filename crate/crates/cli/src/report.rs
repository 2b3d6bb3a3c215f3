//! The versioned report envelope and its JSON and CSV writers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use szego::report::Check;

use crate::config::RunConfig;

/// Bumped whenever a field of [`Report`] changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Wall-clock seconds, kept apart from the payload so that payloads of equal
/// runs compare byte for byte.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub phases: BTreeMap<String, f64>,
    /// Basis tables read from the cache instead of computed.
    pub cache_hits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: RunConfig,
    pub payload: serde_json::Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub timings: Timings,
}

impl Report {
    pub fn new(config: RunConfig, payload: serde_json::Value, checks: Vec<Check>, timings: Timings) -> Self {
        let pass = szego::report::all_pass(&checks);
        Report { schema_version: SCHEMA_VERSION, config, payload, checks, pass, timings }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values serialize")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Report> {
        serde_json::from_str(s)
    }

    /// Writes `<dir>/<command>.json`.
    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.json", self.config.command));
        std::fs::write(&path, self.to_json() + "\n")?;
        Ok(path)
    }
}

/// A CSV table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
    }

    /// Writes `<dir>/<name>.csv`.
    pub fn write(&self, dir: &Path, name: &str) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{name}.csv"));
        std::fs::write(&path, self.to_csv())?;
        Ok(path)
    }
}

/// Shortest round-trip decimal, as in the JSON reports.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
