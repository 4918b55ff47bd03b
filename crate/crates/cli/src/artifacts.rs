use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;

pub const MANIFEST: &str = "manifest.json";
pub const FAILURE: &str = "failure.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hyptree::Error),
    #[error("io error: {0}")]
    Io(String),
    #[error("invariant violation: {0}")]
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use hyptree::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Violation(_) => 3,
            CliError::Io(_) => 4,
            CliError::Core(e) => match e {
                E::CapacityExhausted { .. } => 4,
                E::NonInjective(..) | E::NotMetric { .. } => 3,
                _ => 2,
            },
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(_) => match self.exit_code() {
                3 => "invariant",
                4 => "resource",
                _ => "config",
            },
            CliError::Io(_) => "resource",
            CliError::Violation(_) => "invariant",
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// JSON with two-space indentation and a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: Command,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
}

/// Common envelope of every JSON report.
#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub command: &'a str,
    pub mode: String,
    pub seed: Option<u64>,
    pub tolerance: f64,
    pub report: T,
}

/// Artifacts held in memory until the command has finished.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    inputs: Vec<FileDigest>,
    violation: Option<String>,
}

impl Outputs {
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.files.push((name.to_string(), json_bytes(value)?));
        Ok(())
    }

    pub fn report<T: Serialize>(
        &mut self,
        name: &str,
        command: &Command,
        mode: &str,
        seed: Option<u64>,
        tolerance: f64,
        body: T,
    ) -> CliResult<()> {
        let r = Report { command: command.name(), mode: mode.to_string(), seed, tolerance, report: body };
        self.json(name, &r)
    }

    pub fn text(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body.into_bytes()));
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(bytes) });
    }

    /// Marks the run as failing a checked bound; artifacts are still written.
    pub fn violation(&mut self, what: String) {
        self.violation = Some(match self.violation.take() {
            Some(prev) => format!("{prev}; {what}"),
            None => what,
        });
    }

    /// Writes every artifact, then the manifest.
    pub fn commit(self, out_dir: &Path, config: &Command) -> CliResult<Vec<FileDigest>> {
        let mut digests = Vec::new();
        for (name, bytes) in &self.files {
            let path = out_dir.join(name);
            fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            digests.push(FileDigest { path: name.clone(), sha256: sha256_hex(bytes) });
        }
        let manifest = Manifest {
            tool: "hyptree".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            inputs: self.inputs,
            artifacts: digests.clone(),
        };
        let path = out_dir.join(MANIFEST);
        fs::write(&path, json_bytes(&manifest)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        match self.violation {
            Some(v) => Err(CliError::Violation(v)),
            None => Ok(digests),
        }
    }
}

pub fn clear_markers(out_dir: &Path) -> CliResult<()> {
    for name in [MANIFEST, FAILURE] {
        let p: PathBuf = out_dir.join(name);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Failure<'a> {
    command: &'a str,
    kind: &'a str,
    exit_code: u8,
    message: String,
}

pub fn write_failure(out_dir: &Path, command: &Command, err: &CliError) -> std::io::Result<()> {
    let f = Failure { command: command.name(), kind: err.kind(), exit_code: err.exit_code(), message: err.to_string() };
    let mut bytes = serde_json::to_vec_pretty(&f)?;
    bytes.push(b'\n');
    fs::write(out_dir.join(FAILURE), bytes)
}
