use std::io::Read;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one run: what was asked, with which seed, and what was read and
/// written.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub exit_code: i32,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn digests(paths: &[PathBuf]) -> std::io::Result<Vec<FileDigest>> {
    paths.iter().map(|p| Ok(FileDigest { path: p.clone(), sha256: sha256_file(p)? })).collect()
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>, started: String) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            seed,
            tool_version: format!("hmrf {}", env!("CARGO_PKG_VERSION")),
            started,
            finished: String::new(),
            exit_code: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Digest the files, stamp the finish time and write the manifest to
    /// `dest`, or to stderr when there is no destination.
    pub fn finish(
        mut self,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        exit_code: i32,
        dest: Option<&Path>,
    ) -> std::io::Result<()> {
        self.inputs = digests(inputs)?;
        self.outputs = digests(outputs)?;
        self.exit_code = exit_code;
        self.finished = now();
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises") + "\n";
        match dest {
            Some(p) => std::fs::write(p, text),
            None => {
                eprint!("{text}");
                Ok(())
            }
        }
    }
}
