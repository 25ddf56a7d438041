//! Reports, manifests and content hashes.
//!
//! A report holds everything an experiment computed and nothing about the
//! run itself, so identical config and seed give a byte-identical
//! `report.json`. Wall time, versions and input hashes go to the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub target: String,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, value: f64, target: impl Into<String>, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, value, target: target.into(), detail: detail.into() }
    }
}

/// A named table of numbers, written as one block of the .dat file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let names: Vec<&str> = self.columns.iter().map(|c| c.as_str()).collect();
        magsle_core::snapshot::observables_csv(&names, &self.rows)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub tables: Vec<Table>,
    pub summary: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(experiment: &str, config_hash: &str, seed: u64) -> Self {
        Report { experiment: experiment.into(), config_hash: config_hash.into(), seed, ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn note(&mut self, key: &str, v: impl Serialize) {
        self.summary.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn tolerance(&mut self, key: &str, v: f64) {
        self.tolerances.insert(key.into(), v);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputHash {
    pub name: String,
    /// Git-style blob id under the SHA-256 object format.
    pub blob: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub report_hash: String,
    pub versions: BTreeMap<String, String>,
    pub inputs: Vec<InputHash>,
    pub tolerances: BTreeMap<String, f64>,
    pub checks_passed: bool,
    pub threads: usize,
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `sha256("blob <len>\0" ++ content)`, the id git gives a blob in a
/// SHA-256 repository.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("magsle-core".to_string(), magsle_core::VERSION.to_string()),
        ("magsle-lab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ])
}

impl Manifest {
    pub fn for_report(r: &Report, inputs: Vec<InputHash>, threads: usize, wall_time_s: f64) -> Self {
        Manifest {
            experiment: r.experiment.clone(),
            seed: r.seed,
            config_hash: r.config_hash.clone(),
            report_hash: r.hash(),
            versions: versions(),
            inputs,
            tolerances: r.tolerances.clone(),
            checks_passed: r.passed(),
            threads,
            wall_time_s,
        }
    }
}

/// Write `report.json`, one CSV per table, `checks.csv` and `manifest.json`.
pub fn write_report(dir: &Path, r: &Report, m: &Manifest) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, text)?;
        out.push(p);
        Ok(())
    };
    put("report.json", r.to_json())?;
    for t in &r.tables {
        put(&format!("{}.csv", t.name), t.to_csv())?;
    }
    let mut checks = String::from("name,pass,value,target,detail\n");
    for c in &r.checks {
        checks.push_str(&format!("{},{},{},{},{}\n", c.name, c.pass, c.value, csv_field(&c.target), csv_field(&c.detail)));
    }
    put("checks.csv", checks)?;
    put("manifest.json", serde_json::to_string_pretty(m).unwrap())?;
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_sha256_format() {
        // `git hash-object --object-format=sha256` of an empty file
        assert_eq!(blob_hash(b""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
    }

    #[test]
    fn report_hash_ignores_nothing_but_is_stable() {
        let mut r = Report::new("x", "abc", 3);
        r.note("k", 1.5);
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1.0, 2.0]);
        r.tables.push(t);
        assert_eq!(r.hash(), r.clone().hash());
        let mut s = r.clone();
        s.seed = 4;
        assert_ne!(r.hash(), s.hash());
    }
}
