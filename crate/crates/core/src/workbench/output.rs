//! CSV series and JSON run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::CMat4;
use crate::model::DensityMatrix;

/// Environment variable that overrides the default output directory.
pub const OUT_ENV: &str = "EXCITONBENCH_OUT";

/// `--out` wins, then the environment variable, then `./out`.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("out"),
    }
}

/// Fixed-width scientific formatting so identical inputs give identical bytes.
pub fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// A table with a header row; written through the `csv` crate.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

fn pair_columns() -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            v.push((i, j));
        }
    }
    v
}

/// Density-matrix trajectory: time (s, NMR frame), populations, then real and
/// imaginary parts of the upper-triangle coherences; optional standard errors
/// of the populations.
pub fn trajectory_table(times: &[f64], states: &[DensityMatrix], std_error: Option<&[CMat4]>) -> Table {
    let mut header = vec!["t_s[nmr]".to_string()];
    header.extend((1..=4).map(|i| format!("rho{i}{i}")));
    for (i, j) in pair_columns() {
        header.push(format!("re_rho{}{}", i + 1, j + 1));
        header.push(format!("im_rho{}{}", i + 1, j + 1));
    }
    if std_error.is_some() {
        header.extend((1..=4).map(|i| format!("se_rho{i}{i}")));
    }
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for (k, (time, s)) in times.iter().zip(states).enumerate() {
        let m = s.matrix();
        let mut row = vec![fmt(*time)];
        row.extend((0..4).map(|i| fmt(m[(i, i)].re)));
        for (i, j) in pair_columns() {
            row.push(fmt(m[(i, j)].re));
            row.push(fmt(m[(i, j)].im));
        }
        if let Some(se) = std_error {
            row.extend((0..4).map(|i| fmt(se[k][(i, i)].re)));
        }
        t.push(row);
    }
    t
}

pub fn population_table(times: &[f64], pops: &[[f64; 4]]) -> Table {
    let mut t = Table::new(["t_s[nmr]", "rho11", "rho22", "rho33", "rho44"]);
    for (time, p) in times.iter().zip(pops) {
        let mut row = vec![fmt(*time)];
        row.extend(p.iter().map(|x| fmt(*x)));
        t.push(row);
    }
    t
}

/// Files written by one command plus the manifest describing them.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    digests: BTreeMap<String, String>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            digests: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.digests.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(path)
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<PathBuf> {
        self.write_bytes(name, &table.to_bytes())
    }

    pub fn digests(&self) -> &BTreeMap<String, String> {
        &self.digests
    }

    /// Writes `manifest.json` (not itself digested).
    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf> {
        manifest.outputs = self.digests;
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Resolved scenario(s), defaults filled in.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub parallel: bool,
    pub wall_time_s: f64,
    /// Solver diagnostics, free-form.
    pub diagnostics: serde_json::Value,
    /// SHA-256 of every file written, keyed by relative path.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>, parallel: bool) -> Self {
        RunManifest {
            tool: "excitonbench".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seeds,
            parallel,
            wall_time_s: 0.0,
            diagnostics: serde_json::Value::Null,
            outputs: BTreeMap::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_header_names_frame() {
        let rho = DensityMatrix::site(0).unwrap();
        let t = trajectory_table(&[0.0, 1e-3], &[rho, rho], None);
        assert_eq!(t.header[0], "t_s[nmr]");
        assert_eq!(t.header.len(), 1 + 4 + 12);
        let text = String::from_utf8(t.to_bytes()).unwrap();
        assert!(text.starts_with("t_s[nmr],rho11,rho22"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn flag_beats_environment() {
        assert_eq!(resolve_out_dir(Some(Path::new("x"))), PathBuf::from("x"));
    }
}
