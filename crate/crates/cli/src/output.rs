//! On-disk schemas. Every file states `schema_version` in its header.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use polykin::harness::{ConvergenceReport, MomentSet};

use crate::error::CliError;
use crate::run::{Coordinates, Frame};

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    write_file(path, &text)
}

/// Column names of moments.csv: t, the moment values, then `SE_` + each.
pub fn moment_columns() -> Vec<String> {
    let values = MomentSet::columns();
    let errors = values.iter().map(|c| format!("SE_{c}"));
    std::iter::once("t".to_string())
        .chain(values.iter().cloned())
        .chain(errors)
        .collect()
}

pub fn moments_csv(rows: &[(f64, MomentSet)]) -> String {
    let mut out = format!("# schema_version={SCHEMA_VERSION}\n{}\n", moment_columns().join(","));
    for (t, m) in rows {
        let fields: Vec<String> = std::iter::once(*t)
            .chain(m.values())
            .chain(m.errors())
            .map(|v| format!("{v:e}"))
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SnapshotEntry {
    t: f64,
    file: String,
}

#[derive(Serialize)]
struct SnapshotIndex<'a> {
    schema_version: u32,
    kind: &'a str,
    /// One value per line, in the row order of the coordinates file.
    layout: &'static str,
    length: usize,
    coordinates: &'static str,
    coordinate_columns: &'a [String],
    snapshots: Vec<SnapshotEntry>,
}

fn dense(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for v in values {
        let _ = writeln!(s, "{v:e}");
    }
    s
}

fn coordinates_csv(c: &Coordinates) -> String {
    let mut s = format!("# schema_version={SCHEMA_VERSION}\n{}\n", c.columns.join(","));
    for row in &c.rows {
        let r: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Writes `dir/rho_NNNN.txt`, `dir/coordinates.csv` and `dir/index.json`.
pub fn write_snapshots(dir: &Path, coords: &Coordinates, frames: &[Frame]) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for (k, f) in frames.iter().enumerate() {
        let name = format!("rho_{k:04}.txt");
        let path = dir.join(&name);
        write_file(&path, &dense(&f.values))?;
        written.push(path);
        entries.push(SnapshotEntry { t: f.t, file: name });
    }
    let cpath = dir.join("coordinates.csv");
    write_file(&cpath, &coordinates_csv(coords))?;
    written.push(cpath);
    let index = SnapshotIndex {
        schema_version: SCHEMA_VERSION,
        kind: &coords.kind,
        layout: "dense text, one value per line",
        length: coords.rows.len(),
        coordinates: "coordinates.csv",
        coordinate_columns: &coords.columns,
        snapshots: entries,
    };
    let ipath = dir.join("index.json");
    write_json(&ipath, &index)?;
    written.push(ipath);
    Ok(written)
}

/// Provenance of one invocation. Wall time lives only here, never in the
/// data files, so those stay byte-identical across reruns.
#[derive(Serialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub command: String,
    pub code_version: String,
    pub config_path: String,
    /// SHA-256 of the config file bytes as read.
    pub config_sha256: String,
    pub seed: u64,
    pub seed_overridden: bool,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

#[derive(Serialize)]
pub struct ReportFile<'a> {
    pub schema_version: u32,
    pub config_sha256: &'a str,
    /// Thresholds are engineering calibrations, not limits derived from
    /// the theory.
    pub thresholds: &'static str,
    pub passed: bool,
    pub report: &'a ConvergenceReport,
}

pub fn distances_csv(r: &ConvergenceReport) -> String {
    let mut s = format!(
        "# schema_version={SCHEMA_VERSION}\nepsilon,l1,l2,noise_floor,factorization,factorization_floor,seed,samples,dt,resolution\n"
    );
    for p in &r.points {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:e},{:e},{:e},{},{},{:e},{}",
            p.epsilon,
            p.l1,
            p.l2,
            p.noise_floor,
            p.factorization,
            p.factorization_floor,
            opt(p.seed.map(|v| v.to_string())),
            opt(p.samples.map(|v| v.to_string())),
            p.dt,
            p.resolution
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn columns_follow_the_documented_order() {
        let c = moment_columns();
        assert_eq!(c[0], "t");
        assert_eq!(c[1], "rho");
        assert_eq!(c.len(), 1 + 2 * 17);
        assert_eq!(c[17], "S");
        assert_eq!(c[18], "SE_rho");
        assert_eq!(c.last().unwrap(), "SE_S");
    }
}
