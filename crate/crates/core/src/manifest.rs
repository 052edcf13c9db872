//! Per-stage manifests recording input, config and output digests.
//!
//! A stage is up to date when its manifest exists, the recorded input and
//! config digests equal the current ones, and every recorded output still
//! has the recorded digest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Digest of any serializable settings value.
pub fn config_digest<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_bytes(&serde_json::to_vec(value)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_sha256: String,
    /// Keyed by logical input name.
    pub inputs: BTreeMap<String, FileDigest>,
    pub outputs: BTreeMap<String, FileDigest>,
}

fn digest_all(files: &[(String, PathBuf)]) -> Result<BTreeMap<String, FileDigest>> {
    files
        .iter()
        .map(|(name, path)| {
            Ok((
                name.clone(),
                FileDigest {
                    path: path.clone(),
                    sha256: sha256_file(path)?,
                },
            ))
        })
        .collect()
}

impl Manifest {
    pub fn build(stage: &str, config_sha256: String, inputs: &[(String, PathBuf)], outputs: &[(String, PathBuf)]) -> Result<Self> {
        Ok(Self {
            stage: stage.to_string(),
            config_sha256,
            inputs: digest_all(inputs)?,
            outputs: digest_all(outputs)?,
        })
    }

    pub fn load(path: &Path) -> Result<Option<Self>> {
        match std::fs::read_to_string(path) {
            Ok(text) => Ok(serde_json::from_str(&text).ok()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Whether this manifest still describes the files on disk for the
    /// given inputs and config.
    pub fn is_current(&self, config_sha256: &str, inputs: &[(String, PathBuf)]) -> Result<bool> {
        if self.config_sha256 != config_sha256 || self.inputs.len() != inputs.len() {
            return Ok(false);
        }
        for (name, path) in inputs {
            match self.inputs.get(name) {
                Some(d) if d.path == *path && path.is_file() && d.sha256 == sha256_file(path)? => {}
                _ => return Ok(false),
            }
        }
        for d in self.outputs.values() {
            if !d.path.is_file() || sha256_file(&d.path)? != d.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn currency_tracks_inputs_outputs_and_config() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let output = dir.path().join("out.txt");
        std::fs::write(&input, "a").unwrap();
        std::fs::write(&output, "b").unwrap();
        let ins = vec![("in".to_string(), input.clone())];
        let outs = vec![("out".to_string(), output.clone())];
        let m = Manifest::build("s", "c1".into(), &ins, &outs).unwrap();
        let mp = dir.path().join("m.json");
        m.write(&mp).unwrap();
        let m = Manifest::load(&mp).unwrap().unwrap();
        assert!(m.is_current("c1", &ins).unwrap());
        assert!(!m.is_current("c2", &ins).unwrap());
        std::fs::write(&output, "changed").unwrap();
        assert!(!m.is_current("c1", &ins).unwrap());
        std::fs::write(&output, "b").unwrap();
        std::fs::write(&input, "changed").unwrap();
        assert!(!m.is_current("c1", &ins).unwrap());
    }

    #[test]
    fn missing_manifest_is_none() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Manifest::load(&dir.path().join("nope.json")).unwrap().is_none());
    }
}
