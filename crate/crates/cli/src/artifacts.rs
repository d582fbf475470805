//! In-memory artifact set written by a single writer, with a hash manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// One line of `pairings.ndjson`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairingRecord {
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub k: usize,
    pub phi_id: String,
    pub value: f64,
    pub stderr: f64,
}

/// One row of a field CSV; `u` holds the cell centre, coordinates joined by `;`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRow {
    pub u: Vec<f64>,
    pub empirical: f64,
    pub macroscopic: f64,
    pub stderr: f64,
}

pub const FIELD_HEADER: &str = "u,empirical,macroscopic,stderr";

pub fn field_csv(rows: &[FieldRow]) -> String {
    let mut s = String::from(FIELD_HEADER);
    s.push('\n');
    for r in rows {
        let u: Vec<String> = r.u.iter().map(|v| format!("{v}")).collect();
        s.push_str(&format!("{},{},{},{}\n", u.join(";"), r.empirical, r.macroscopic, r.stderr));
    }
    s
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    path: &'a str,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    seed: u64,
    config: &'a str,
    files: Vec<ManifestEntry<'a>>,
}

/// Files keyed by relative path, emitted in sorted order.
#[derive(Clone, Debug, Default)]
pub struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
    pairings: Vec<PairingRecord>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.insert(path.into(), contents.into());
    }

    pub fn pairing(&mut self, rec: PairingRecord) {
        self.pairings.push(rec);
    }

    pub fn pairings(&self) -> &[PairingRecord] {
        &self.pairings
    }

    pub fn field(&mut self, path: impl Into<String>, rows: &[FieldRow]) {
        self.add(path, field_csv(rows));
    }

    pub fn get(&self, path: &str) -> Option<&[u8]> {
        self.files.get(path).map(|v| v.as_slice())
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(|s| s.as_str())
    }

    fn finish(&mut self) {
        if !self.pairings.is_empty() {
            let mut s = String::new();
            for p in &self.pairings {
                s.push_str(&serde_json::to_string(p).expect("records serialise"));
                s.push('\n');
            }
            self.files.insert("pairings.ndjson".into(), s.into_bytes());
        }
    }

    /// Write every file plus `manifest.json` under `dir`; returns the written paths.
    pub fn write(mut self, dir: &Path, experiment: &str, seed: u64) -> Result<Vec<PathBuf>> {
        self.finish();
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        let manifest = Manifest {
            experiment,
            seed,
            config: "effective_config.toml",
            files: self
                .files
                .iter()
                .map(|(p, b)| ManifestEntry { path: p, bytes: b.len(), sha256: hex(&Sha256::digest(b)) })
                .collect(),
        };
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(written)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_field_is_header_only() {
        assert_eq!(field_csv(&[]), "u,empirical,macroscopic,stderr\n");
    }

    #[test]
    fn field_rows_use_lf_and_fixed_columns() {
        let s = field_csv(&[FieldRow { u: vec![0.25, 0.5], empirical: 1.0, macroscopic: 2.0, stderr: 0.5 }]);
        assert_eq!(s, "u,empirical,macroscopic,stderr\n0.25;0.5,1,2,0.5\n");
    }

    #[test]
    fn manifest_lists_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::new();
        a.add("x.txt", "abc");
        a.write(dir.path(), "flow-audit", 3).unwrap();
        let m = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(m.contains("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
    }
}
