//! Run manifests: which files a command produced, hashed so a run can be
//! audited after the fact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rates::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// relative to the manifest's own directory
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub outputs: Vec<OutputFile>,
    pub tool_version: String,
    pub duration_ms: u64,
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    use std::fmt::Write as _;
    let mut hasher = Sha256::new();
    hasher.update(fs::read(path)?);
    let mut hex = String::with_capacity(64);
    for byte in hasher.finalize() {
        write!(hex, "{byte:02x}").unwrap();
    }
    Ok(hex)
}

impl RunManifest {
    /// Hashes `files` (paths relative to `base`) into a manifest.
    pub fn capture(
        config: ExperimentConfig,
        base: &Path,
        files: &[String],
        duration_ms: u64,
    ) -> Result<Self> {
        let mut outputs = Vec::with_capacity(files.len());
        for file in files {
            outputs.push(OutputFile {
                path: file.clone(),
                sha256: sha256_hex(&base.join(file))?,
            });
        }
        Ok(RunManifest {
            config,
            outputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            duration_ms,
        })
    }

    /// Every listed file must still exist under `base` and match its hash.
    pub fn verify(&self, base: &Path) -> Result<()> {
        for out in &self.outputs {
            let path = base.join(&out.path);
            if !path.is_file() {
                return Err(Error::VerificationFailed(format!(
                    "missing output file {}",
                    out.path
                )));
            }
            let got = sha256_hex(&path)?;
            if got != out.sha256 {
                return Err(Error::VerificationFailed(format!(
                    "hash mismatch for {}: recorded {}, found {got}",
                    out.path, out.sha256
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(fs::write(path, text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        fs::write(&path, "abc").unwrap();
        assert_eq!(
            sha256_hex(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn capture_verify_roundtrip_and_tamper() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x.csv"), "1,2\n").unwrap();
        fs::write(dir.path().join("y.csv"), "3,4\n").unwrap();
        let m = RunManifest::capture(
            ExperimentConfig::default(),
            dir.path(),
            &["x.csv".into(), "y.csv".into()],
            12,
        )
        .unwrap();
        m.verify(dir.path()).unwrap();

        let mpath = dir.path().join("manifest.json");
        m.save(&mpath).unwrap();
        let back = RunManifest::load(&mpath).unwrap();
        assert_eq!(back, m);

        fs::write(dir.path().join("y.csv"), "3,5\n").unwrap();
        match back.verify(dir.path()) {
            Err(Error::VerificationFailed(msg)) => assert!(msg.contains("y.csv")),
            other => panic!("expected hash mismatch, got {other:?}"),
        }
        fs::remove_file(dir.path().join("x.csv")).unwrap();
        match back.verify(dir.path()) {
            Err(Error::VerificationFailed(msg)) => assert!(msg.contains("x.csv")),
            other => panic!("expected missing file, got {other:?}"),
        }
    }
}
