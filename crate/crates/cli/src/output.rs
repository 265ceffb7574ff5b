use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use spamsim::Config;

/// Hex SHA-256 of the effective configuration in canonical TOML.
pub fn config_hash(cfg: &Config) -> String {
    let digest = Sha256::digest(cfg.to_toml_string().as_bytes());
    digest.iter().map(|b| format!("{:02x}", b)).collect()
}

/// Collects output files and writes them together once nothing would be
/// overwritten by accident.
pub struct OutputSet {
    dir: PathBuf,
    force: bool,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn new(dir: &Path, force: bool) -> Self {
        OutputSet { dir: dir.to_path_buf(), force, files: Vec::new() }
    }

    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }

    pub fn add_json(&mut self, name: &str, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
        text.push('\n');
        self.add(name, text);
    }

    /// CSV body preceded by a provenance comment line.
    pub fn add_csv(&mut self, name: &str, header: &str, body: &str) {
        self.add(name, format!("{}\n{}", header, body));
    }

    pub fn write(self) -> io::Result<Vec<PathBuf>> {
        if !self.force {
            for (name, _) in &self.files {
                let p = self.dir.join(name);
                if p.exists() {
                    return Err(io::Error::new(
                        io::ErrorKind::AlreadyExists,
                        format!("{} exists; pass --force to overwrite", p.display()),
                    ));
                }
            }
        }
        fs::create_dir_all(&self.dir)?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let p = self.dir.join(name);
            fs::write(&p, bytes)?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Seconds since the epoch, taken from `SOURCE_DATE_EPOCH` when set.
pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

pub fn manifest(subcommand: &str, config_path: Option<&Path>, seed: u64, out: &Path, hash: &str) -> Value {
    json!({
        "subcommand": subcommand,
        "config_path": config_path.map(|p| p.display().to_string()),
        "seed": seed,
        "output_dir": out.display().to_string(),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "timestamp": timestamp(),
        "config_sha256": hash,
    })
}
