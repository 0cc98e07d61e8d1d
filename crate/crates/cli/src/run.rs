//! Per-invocation context: resolves inputs against the config directory, writes outputs,
//! and emits the run manifest once everything else is on disk.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Compact JSON with object keys sorted at every level.
pub fn canonical_json(v: &Value) -> String {
    fn sorted(v: &Value) -> Value {
        match v {
            Value::Object(o) => {
                let mut keys: Vec<&String> = o.keys().collect();
                keys.sort();
                let mut out = Map::new();
                for k in keys {
                    out.insert(k.clone(), sorted(&o[k]));
                }
                Value::Object(out)
            }
            Value::Array(a) => Value::Array(a.iter().map(sorted).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sorted(v)).expect("JSON values serialize")
}

fn now() -> String {
    OffsetDateTime::now_utc().format(&Rfc3339).unwrap_or_else(|_| "unknown".into())
}

pub struct Run {
    command: &'static str,
    pub seed: u64,
    config_dir: PathBuf,
    out_dir: PathBuf,
    config_hash: String,
    started: String,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
    /// Effective settings worth recording beyond the raw config.
    settings: Map<String, Value>,
}

impl Run {
    pub fn new(command: &'static str, seed: u64, config_dir: PathBuf, out_dir: PathBuf, config: &Value) -> CliResult<Self> {
        fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(Self {
            command,
            seed,
            config_dir,
            out_dir,
            config_hash: sha256_hex(canonical_json(config).as_bytes()),
            started: now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            settings: Map::new(),
        })
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config_dir.join(p)
        }
    }

    /// Reads an input file named relative to the config and records its digest.
    pub fn read_input(&mut self, rel: &str) -> CliResult<String> {
        let path = self.resolve(rel);
        let bytes = fs::read(&path).map_err(|e| CliError::Input(format!("cannot read input {rel}: {e}")))?;
        self.inputs.push((rel.to_string(), sha256_hex(&bytes)));
        String::from_utf8(bytes).map_err(|_| CliError::Input(format!("input {rel} is not UTF-8")))
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(())
    }

    pub fn record_setting(&mut self, key: &str, value: Value) {
        self.settings.insert(key.to_string(), value);
    }

    /// Writes the manifest; results are valid only once this has succeeded.
    pub fn finish(mut self) -> CliResult<()> {
        self.inputs.sort();
        self.inputs.dedup();
        let digests = |v: &[(String, String)]| -> Vec<Value> {
            v.iter().map(|(p, d)| json!({ "path": p, "sha256": d })).collect()
        };
        let mut manifest = json!({
            "tool": "ncac",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "config_sha256": self.config_hash,
            "started": self.started,
            "finished": now(),
            "inputs": digests(&self.inputs),
            "outputs": digests(&self.outputs),
        });
        if !self.settings.is_empty() {
            manifest["settings"] = Value::Object(std::mem::take(&mut self.settings));
        }
        let text = ncac_core::export::to_pretty(&manifest);
        let path = self.out_dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
    }
}
