use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// What was run, with what, producing what. Written as `manifest.txt`
/// next to every command's outputs.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config_file: Option<PathBuf>,
    /// Effective option values, defaults included.
    pub options: Vec<(String, String)>,
    pub seeds: Vec<(String, u64)>,
    /// `(role, path, sha256)` of files read.
    pub inputs: Vec<(String, PathBuf, String)>,
    /// `(file name, sha256)` of files written.
    pub outputs: Vec<(String, String)>,
    pub started: u64,
    pub finished: u64,
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool=rhymebeat {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "argv={}", self.argv.join(" "));
        if let Some(p) = &self.config_file {
            let _ = writeln!(s, "config_file={}", p.display());
        }
        let _ = writeln!(s, "started_unix={}", self.started);
        let _ = writeln!(s, "finished_unix={}", self.finished);
        s.push_str("[options]\n");
        for (k, v) in &self.options {
            let _ = writeln!(s, "{k}={v}");
        }
        s.push_str("[seeds]\n");
        for (k, v) in &self.seeds {
            let _ = writeln!(s, "{k}={v}");
        }
        s.push_str("[inputs]\n");
        for (role, path, hash) in &self.inputs {
            let _ = writeln!(s, "{role}\t{}\tsha256:{hash}", path.display());
        }
        s.push_str("[outputs]\n");
        for (name, hash) in &self.outputs {
            let _ = writeln!(s, "{name}\tsha256:{hash}");
        }
        s
    }
}
