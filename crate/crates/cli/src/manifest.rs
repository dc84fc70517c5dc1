use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub parameters: BTreeMap<String, Value>,
    pub tolerances: BTreeMap<String, f64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Seconds since the Unix epoch; the only field that differs between reruns.
    pub timestamp: u64,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory plus the manifest being filled in.
pub struct Run {
    out: PathBuf,
    pub manifest: Manifest,
}

impl Run {
    pub fn new(command: &str, out: &Path) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
        Ok(Run {
            out: out.to_path_buf(),
            manifest: Manifest {
                tool: "edgeswitch",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                args: std::env::args().skip(1).collect(),
                seed: None,
                parameters: BTreeMap::new(),
                tolerances: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                timestamp: 0,
            },
        })
    }

    /// Reads an input file and records its hash.
    pub fn input(&mut self, path: &Path) -> Result<String> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.manifest.inputs.push(FileDigest { path: path.display().to_string(), sha256: digest(text.as_bytes()) });
        Ok(text)
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.manifest.parameters.insert(key.to_string(), v);
    }

    pub fn tolerance(&mut self, key: &str, value: f64) {
        self.manifest.tolerances.insert(key.to_string(), value);
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(FileDigest { path: name.to_string(), sha256: digest(contents.as_bytes()) });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(mut self) -> Result<()> {
        self.manifest.timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let path = self.out.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
