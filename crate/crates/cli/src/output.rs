//! Result bundles: atomic file writes, content hashes and the manifest.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

/// Anything that stops a run before a bundle can be written.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] shl_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        use shl_core::Error as E;
        match self {
            Failure::Core(E::Accuracy { .. }) => 2,
            Failure::Core(E::NoScale(_) | E::TrivialOnly(_) | E::NonConvergence { .. }) => 3,
            _ => 1,
        }
    }
}

/// Outcome of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    /// A verification check missed its tolerance.
    Failed,
    /// The solver found no nontrivial state.
    NoSolution,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Passed => 0,
            Status::Failed => 2,
            Status::NoSolution => 3,
        }
    }

    pub fn from_checks(ok: bool) -> Self {
        if ok {
            Status::Passed
        } else {
            Status::Failed
        }
    }
}

/// Files and summary produced by one experiment.
#[derive(Debug)]
pub struct Report {
    pub status: Status,
    pub summary: Value,
    pub files: Vec<(String, Vec<u8>)>,
}

impl Report {
    pub fn new(status: Status, summary: Value) -> Self {
        Self {
            status,
            summary,
            files: vec![],
        }
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_owned(), bytes));
    }
}

/// CSV bytes from a header and rows of display-formatted cells.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>, Failure>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| Failure::Io(e.into_error()))
}

#[derive(Serialize)]
struct FileEntry<'a> {
    name: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_sha256: &'a str,
    status: Status,
    summary: &'a Value,
    files: Vec<FileEntry<'a>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

/// Writes every file of `report`, then `manifest.json` listing their hashes.
pub fn write_bundle(dir: &Path, subcommand: &str, config_sha256: &str, report: &Report) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in &report.files {
        write_atomic(dir, name, bytes)?;
    }
    let manifest = Manifest {
        tool: "shl",
        version: shl_core::VERSION,
        subcommand,
        config_sha256,
        status: report.status,
        summary: &report.summary,
        files: report
            .files
            .iter()
            .map(|(name, bytes)| FileEntry {
                name,
                sha256: sha256_hex(bytes),
            })
            .collect(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| Failure::Io(e.into()))?;
    json.push(b'\n');
    write_atomic(dir, "manifest.json", &json)?;
    Ok(())
}
