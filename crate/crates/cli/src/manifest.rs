//! Run manifests: every emitted file listed with a content hash, so
//! re-running a configuration can be checked for reproducibility by
//! comparing manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// FNV-1a 64-bit; reproducibility bookkeeping, not a security boundary.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: String,
    pub output_dir: PathBuf,
    /// (relative path, content hash) per emitted file.
    pub files: Vec<(String, u64)>,
}

impl RunManifest {
    pub fn new(config_path: &str, output_dir: &Path) -> Self {
        Self {
            config_path: config_path.to_string(),
            output_dir: output_dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    /// Writes a file under the output directory and records its hash.
    pub fn emit(&mut self, relative: &str, contents: &str) -> Result<(), CliError> {
        let path = self.output_dir.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.files.push((relative.to_string(), fnv1a64(contents.as_bytes())));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::from("# run manifest (hash = FNV-1a 64-bit of file bytes)\n");
        let _ = writeln!(out, "config = {}", self.config_path);
        let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        for (name, hash) in &self.files {
            let _ = writeln!(out, "file = {name} fnv1a64 = {hash:016x}");
        }
        out
    }

    /// Writes the manifest itself (not listed among the hashed files).
    pub fn write(&self) -> Result<PathBuf, CliError> {
        let path = self.output_dir.join("manifest.txt");
        fs::write(&path, self.render())?;
        Ok(path)
    }

    /// The `file = ...` lines only; identical configurations must
    /// reproduce these exactly even across output directories.
    pub fn hash_lines(&self) -> Vec<String> {
        self.files
            .iter()
            .map(|(name, hash)| format!("file = {name} fnv1a64 = {hash:016x}"))
            .collect()
    }
}
