//! Run manifests: a single JSON file recording what a run was asked to do,
//! what it produced, and content digests so `verify` can re-check the
//! outputs byte for byte later.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskRecord {
    pub name: String,
    /// "ok", "nonexistent" (an expected scientific outcome), "blowup",
    /// or "error".
    pub status: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    /// Normalized `section.key = value` echo of the effective config.
    pub config: Vec<[String; 2]>,
    pub seed: u64,
    /// Unix milliseconds; informational only, excluded from determinism
    /// guarantees (those cover the CSV outputs).
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub tasks: Vec<TaskRecord>,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn new(command: &str, config_echo: &[(String, String)], seed: u64) -> Self {
        RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config_echo
                .iter()
                .map(|(k, v)| [k.clone(), v.clone()])
                .collect(),
            seed,
            started_unix_ms: now_ms(),
            finished_unix_ms: 0,
            tasks: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn task(&mut self, name: impl Into<String>, status: &str, detail: impl Into<String>) {
        self.tasks.push(TaskRecord {
            name: name.into(),
            status: status.into(),
            detail: detail.into(),
        });
    }

    /// Record a file that was just written under `root`.
    pub fn add_output(&mut self, root: &Path, rel: &str) -> io::Result<()> {
        let full = root.join(rel);
        let bytes = fs::read(&full)?;
        self.outputs.push(OutputRecord {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex_digest(&bytes),
        });
        Ok(())
    }

    pub fn finish_and_write(mut self, root: &Path) -> io::Result<PathBuf> {
        self.finished_unix_ms = now_ms();
        let path = root.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> io::Result<RunManifest> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Re-hash every listed output against its recorded digest. Returns
    /// (path, ok, detail) per file.
    pub fn revalidate(&self, root: &Path) -> Vec<(String, bool, String)> {
        let mut rows = Vec::new();
        for out in &self.outputs {
            let full = root.join(&out.path);
            let row = match fs::read(&full) {
                Err(e) => (out.path.clone(), false, format!("unreadable: {e}")),
                Ok(bytes) => {
                    let got = hex_digest(&bytes);
                    if got == out.sha256 && bytes.len() as u64 == out.bytes {
                        (out.path.clone(), true, "digest matches".to_string())
                    } else {
                        (
                            out.path.clone(),
                            false,
                            format!("digest mismatch: recorded {} got {got}", out.sha256),
                        )
                    }
                }
            };
            rows.push(row);
        }
        rows
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            hex_digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn roundtrip_and_revalidate() {
        let dir = std::env::temp_dir().join(format!("kpp-manifest-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("a.csv"), "x,y\n1,2\n").unwrap();
        let mut man = RunManifest::new("tw", &[("tw.m".into(), "2".into())], 7);
        man.task("solve", "ok", "");
        man.add_output(&dir, "a.csv").unwrap();
        let path = man.finish_and_write(&dir).unwrap();

        let loaded = RunManifest::load(&path).unwrap();
        let rows = loaded.revalidate(&dir);
        assert!(rows.iter().all(|r| r.1));

        fs::write(dir.join("a.csv"), "tampered").unwrap();
        let rows = loaded.revalidate(&dir);
        assert!(!rows[0].1);
        fs::remove_dir_all(&dir).ok();
    }
}
