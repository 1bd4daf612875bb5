//! Run manifest: what was run, with which resolved configuration, and the
//! sha256 of every artifact it produced.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub config: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Artifact path relative to the manifest's directory → hex sha256.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

impl RunManifest {
    pub fn new(command: &str, out: &Path) -> Self {
        Self {
            command: command.to_string(),
            config_path: None,
            config: BTreeMap::new(),
            seed: None,
            out: out.to_path_buf(),
            artifacts: BTreeMap::new(),
        }
    }

    /// Records checksums of `files`, stored relative to `base`.
    pub fn add_artifacts(&mut self, base: &Path, files: &[PathBuf]) -> Result<()> {
        for f in files {
            let rel = f.strip_prefix(base).unwrap_or(f);
            self.artifacts
                .insert(rel.to_string_lossy().replace('\\', "/"), sha256_file(f)?);
        }
        Ok(())
    }

    /// Atomic write (temporary file + rename) followed by re-verification of
    /// every artifact checksum.
    pub fn write_and_verify(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::load(path)?.verify(base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn verify(&self, base: &Path) -> Result<()> {
        for (rel, want) in &self.artifacts {
            let got = sha256_file(&base.join(rel))?;
            if &got != want {
                return Err(Error::Input(format!("artifact {rel} checksum mismatch: {got} != {want}")));
            }
        }
        Ok(())
    }
}
