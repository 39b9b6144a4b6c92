//! Artifact bookkeeping: every file a run writes is registered here and
//! listed, with its SHA-256, in `manifest.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Cached,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_sha256: String,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<ArtifactRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn succeeded(&self) -> bool {
        !self.stages.iter().any(|s| s.status == StageStatus::Failed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Relative path with forward slashes, as stored in the manifest.
fn rel_string(rel: &Path) -> String {
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

/// Writes files under a root directory and remembers them.
pub struct Artifacts {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(root: &Path) -> Self {
        Artifacts { root: root.to_path_buf(), written: Vec::new() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn register(&mut self, rel: PathBuf) {
        if !self.written.contains(&rel) {
            self.written.push(rel);
        }
    }

    pub fn write_with(
        &mut self,
        rel: &str,
        f: impl FnOnce(&mut Vec<u8>) -> shalekit::Result<()>,
    ) -> Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf).with_context(|| format!("rendering {rel}"))?;
        self.write_bytes(rel, &buf)
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        file.write_all(bytes)?;
        self.register(PathBuf::from(rel));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }

    pub fn forget(&mut self, rel: &str) {
        self.written.retain(|p| p != Path::new(rel));
    }

    /// Register a file some other code wrote under the root.
    pub fn adopt(&mut self, path: &Path) -> Result<()> {
        let rel = path
            .strip_prefix(&self.root)
            .with_context(|| format!("{} is outside the output directory", path.display()))?;
        self.register(rel.to_path_buf());
        Ok(())
    }

    /// Hash everything registered and write `manifest.json`.
    pub fn finish(&self, seed: u64, config_sha256: String, stages: Vec<StageRecord>) -> Result<Manifest> {
        let mut artifacts = Vec::with_capacity(self.written.len());
        for rel in &self.written {
            let bytes = fs::read(self.root.join(rel)).with_context(|| format!("hashing {}", rel.display()))?;
            artifacts.push(ArtifactRecord {
                path: rel_string(rel),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            });
        }
        artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest { seed, config_sha256, stages, artifacts };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.root.join(MANIFEST), bytes)?;
        Ok(manifest)
    }
}

fn list_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            list_files(root, &path, out)?;
        } else {
            out.push(rel_string(path.strip_prefix(root)?));
        }
    }
    Ok(())
}

/// Files under `root`, relative, sorted.
pub fn files_on_disk(root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    if root.exists() {
        list_files(root, root, &mut out)?;
    }
    out.sort();
    Ok(out)
}

/// Remove the artifacts of a previous run, keeping (and returning) paths
/// for which `keep` is true. Refuses to run over a directory holding files
/// it does not own.
pub fn clean_previous(root: &Path, keep: impl Fn(&str) -> bool) -> Result<Vec<String>> {
    if !root.exists() {
        return Ok(Vec::new());
    }
    let owned: Vec<String> = if root.join(MANIFEST).exists() {
        let mut paths: Vec<String> = Manifest::load(root)?.artifacts.into_iter().map(|a| a.path).collect();
        paths.push(MANIFEST.to_string());
        paths
    } else {
        Vec::new()
    };
    let foreign: Vec<String> = files_on_disk(root)?.into_iter().filter(|f| !owned.contains(f)).collect();
    if !foreign.is_empty() {
        bail!(
            "output directory {} holds files not listed in a previous manifest (e.g. {}); \
             choose an empty directory",
            root.display(),
            foreign[0]
        );
    }
    let mut kept = Vec::new();
    for rel in owned {
        let path = root.join(&rel);
        if rel != MANIFEST && keep(&rel) {
            if path.exists() {
                kept.push(rel);
            }
        } else if path.exists() {
            fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?;
            prune_empty_parents(root, &path);
        }
    }
    Ok(kept)
}

fn prune_empty_parents(root: &Path, file: &Path) {
    let mut dir = file.parent();
    while let Some(d) = dir {
        // remove_dir fails on non-empty directories, which ends the walk
        if d == root || fs::remove_dir(d).is_err() {
            break;
        }
        dir = d.parent();
    }
}
