use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Stage seed fanned out from the root seed by label.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the run directory for run artifacts, as given otherwise.
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    fn of(root: &Path, rel: &str) -> Result<Self> {
        Ok(FileDigest {
            path: rel.to_string(),
            sha256: sha256_file(&resolve(root, rel))?,
        })
    }
}

fn resolve(root: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

/// Record written next to a stage's outputs. `upstream` holds the digests of
/// the manifests this stage consumed, which chains the stages together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub config_sha256: String,
    pub seeds: BTreeMap<String, u64>,
    pub upstream: Vec<FileDigest>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn manifest_name(stage: &str) -> String {
    format!("{stage}.manifest.json")
}

impl StageManifest {
    /// Hash `inputs`/`outputs` (paths relative to `root` unless absolute)
    /// and the manifests of `upstream` stages.
    pub fn build(
        root: &Path,
        stage: &str,
        config_sha256: &str,
        seeds: BTreeMap<String, u64>,
        upstream: &[&str],
        inputs: &[&str],
        outputs: &[&str],
    ) -> Result<Self> {
        let digest_all = |names: &[&str]| {
            names
                .iter()
                .map(|n| FileDigest::of(root, n))
                .collect::<Result<Vec<_>>>()
        };
        let upstream: Vec<String> = upstream.iter().map(|s| manifest_name(s)).collect();
        Ok(StageManifest {
            stage: stage.to_string(),
            config_sha256: config_sha256.to_string(),
            seeds,
            upstream: digest_all(&upstream.iter().map(String::as_str).collect::<Vec<_>>())?,
            inputs: digest_all(inputs)?,
            outputs: digest_all(outputs)?,
        })
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        let path = root.join(manifest_name(&self.stage));
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("manifest", e))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(root: &Path, stage: &str) -> Result<Self> {
        let path = root.join(manifest_name(stage));
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    /// Re-hash every file this manifest names.
    pub fn verify(&self, root: &Path) -> Result<()> {
        for (kind, list) in [
            ("upstream manifest", &self.upstream),
            ("input", &self.inputs),
            ("output", &self.outputs),
        ] {
            for d in list {
                let path = resolve(root, &d.path);
                let actual = sha256_file(&path)
                    .map_err(|_| Error::Manifest(format!("stage `{}`: {kind} `{}` is missing", self.stage, d.path)))?;
                if actual != d.sha256 {
                    return Err(Error::Manifest(format!(
                        "stage `{}`: {kind} `{}` changed since it was recorded",
                        self.stage, d.path
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Verify the manifests of `stages` in order.
pub fn verify_chain(root: &Path, stages: &[&str]) -> Result<()> {
    for stage in stages {
        StageManifest::load(root, stage)
            .map_err(|e| Error::Manifest(format!("stage `{stage}` has no readable manifest: {e}")))?
            .verify(root)?;
    }
    Ok(())
}
