//! One experiment, one directory: CSV/JSON files plus `manifest.json`.
//!
//! Every file is written to a temporary name and renamed into place; the
//! manifest goes last and lists each file with its SHA-256.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "expressivity-run";

/// Fixed float formatting: 17 significant digits, round-trips an `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// A refinement hit its sample cap; outputs are complete but flagged.
    NonConverged,
    /// Training hit a non-finite loss; outputs hold the partial run.
    Diverged,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NonConverged => "non-converged",
            Status::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub toolkit_version: String,
    pub prng_algorithm: String,
    pub kind: String,
    pub config: serde_json::Value,
    pub started: String,
    pub finished: String,
    pub status: Status,
    pub notes: Vec<String>,
    pub outputs: Vec<OutputFile>,
    /// Kind-specific facts (for example the shared init digest of a
    /// train-freeze run).
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let m: RunManifest = serde_json::from_str(&text)?;
        if m.format != MANIFEST_FORMAT {
            return Err(CliError::config(format!("{}: not a run manifest", path.display())));
        }
        Ok(m)
    }

    pub fn output(&self, file: &str) -> Option<&OutputFile> {
        self.outputs.iter().find(|o| o.file == file)
    }

    /// 0 when the run finished cleanly, 3 when it was flagged.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => 0,
            Status::NonConverged | Status::Diverged => 3,
        }
    }
}

/// CSV rows built in memory with a fixed header.
pub struct Table {
    header: Vec<String>,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header.iter().map(|s| s.as_ref()))?;
        Ok(Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            writer,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer
            .into_inner()
            .map_err(|e| CliError::io("<csv buffer>", std::io::Error::other(e.to_string())))
    }
}

/// Output directory of one run.
pub struct OutDir {
    dir: PathBuf,
    outputs: Vec<OutputFile>,
}

impl OutDir {
    /// Creates `dir`. A non-empty existing directory is refused unless
    /// `overwrite` is set, in which case its old manifest is removed first so
    /// an interrupted rerun never leaves a stale manifest behind.
    pub fn prepare(dir: &Path, overwrite: bool) -> Result<Self> {
        if dir.exists() {
            let mut entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
            if entries.next().is_some() {
                if !overwrite {
                    return Err(CliError::config(format!(
                        "output directory {} is not empty (pass --overwrite to reuse it)",
                        dir.display()
                    )));
                }
                let manifest = dir.join(MANIFEST);
                if manifest.exists() {
                    fs::remove_file(&manifest).map_err(|e| CliError::io(&manifest, e))?;
                }
            }
        }
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn outputs(&self) -> &[OutputFile] {
        &self.outputs
    }

    fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
        let tmp = path.with_file_name(format!(".{name}.tmp"));
        let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
        f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
    }

    /// Writes `bytes` as `name` and records its digest.
    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if name == MANIFEST || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(CliError::config(format!("refusing output name `{name}`")));
        }
        Self::write_atomic(&self.dir.join(name), bytes)?;
        self.outputs.retain(|o| o.file != name);
        self.outputs.push(OutputFile {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: Table) -> Result<()> {
        let bytes = table.into_bytes()?;
        self.bytes(name, &bytes)
    }

    pub fn network(&mut self, name: &str, net: &expressivity::net::Network) -> Result<String> {
        let text = expressivity::net::format::to_string(net)?;
        self.bytes(name, text.as_bytes())?;
        Ok(sha256_hex(text.as_bytes()))
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.bytes(name, text.as_bytes())
    }

    /// Writes the manifest last.
    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.outputs = self.outputs;
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        Self::write_atomic(&self.dir.join(MANIFEST), text.as_bytes())?;
        Ok(manifest)
    }
}

/// Reads a CSV written by this crate into (header, rows).
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => CliError::io(path, std::io::Error::other(e.to_string())),
        _ => CliError::Csv(e),
    })?;
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1.2345678901234567e17, f64::MIN_POSITIVE] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn refuses_non_empty_dir_without_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x"), "1").unwrap();
        assert!(matches!(OutDir::prepare(dir.path(), false), Err(CliError::Config(_))));
        assert!(OutDir::prepare(dir.path(), true).is_ok());
        let mut out = OutDir::prepare(&dir.path().join("fresh"), false).unwrap();
        assert!(out.bytes("../escape", b"no").is_err());
        assert!(out.bytes(MANIFEST, b"no").is_err());
    }
}
