//! Run manifests: what a command was asked to do, what it read and what it wrote.
//!
//! `args` holds the command's flags exactly as parsed, so `replay` can run
//! the same command again. `resolved` lists every setting after defaults
//! were filled in. Only `started_at` and `finished_at` differ between two
//! runs of the same manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "ssrbm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: PathBuf,
    /// SHA-256 of the file contents.
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Value,
    pub resolved: Value,
    pub inputs: Vec<InputRecord>,
    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
    /// Written files, relative to `out_dir` when inside it.
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("{}: not a run manifest", path.display()))?;
        if manifest.tool != TOOL {
            anyhow::bail!("{}: manifest was written by `{}`", path.display(), manifest.tool);
        }
        Ok(manifest)
    }
}

/// Collects manifest fields while a command runs.
pub struct Recorder {
    manifest: RunManifest,
}

impl Recorder {
    pub fn new<A: Serialize>(command: &str, args: &A, out_dir: &Path) -> Result<Self> {
        Ok(Recorder {
            manifest: RunManifest {
                tool: TOOL.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                args: serde_json::to_value(args)?,
                resolved: Value::Object(Default::default()),
                inputs: Vec::new(),
                seed: 0,
                threads: rayon::current_num_threads(),
                out_dir: out_dir.to_path_buf(),
                outputs: Vec::new(),
                started_at: now(),
                finished_at: String::new(),
            },
        })
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest.inputs.push(InputRecord {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: hex(&Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.manifest.out_dir).unwrap_or(path);
        self.manifest.outputs.push(rel.to_path_buf());
    }

    pub fn resolve(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("plain settings serialize");
        if let Value::Object(map) = &mut self.manifest.resolved {
            map.insert(key.into(), value);
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = seed;
        self.resolve("seed", seed);
    }

    /// Writes the manifest into the output directory and returns its path.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.manifest.finished_at = now();
        let path = self.manifest.out_dir.join(RunManifest::file_name(&self.manifest.command));
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
