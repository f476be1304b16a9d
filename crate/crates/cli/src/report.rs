use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub cache_keys: Vec<String>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
    pub version: &'static str,
}

/// Collects the manifest while a command runs.
pub struct Run {
    manifest: RunManifest,
    start: Instant,
}

impl Run {
    pub fn new(command: &str) -> Self {
        Run {
            manifest: RunManifest {
                command: command.to_string(),
                parameters: BTreeMap::new(),
                cache_keys: Vec::new(),
                outputs: Vec::new(),
                wall_time_s: 0.0,
                version: env!("CARGO_PKG_VERSION"),
            },
            start: Instant::now(),
        }
    }

    pub fn param(&mut self, name: &str, value: impl Into<Value>) -> &mut Self {
        self.manifest.parameters.insert(name.to_string(), value.into());
        self
    }

    pub fn cache_key(&mut self, key: Option<String>) {
        if let Some(key) = key {
            self.manifest.cache_keys.push(key);
        }
    }

    /// Writes `text` to `path` and records it.
    pub fn write_output(&mut self, path: &Path, text: &str) -> Result<()> {
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn finish(mut self, results: Value, out: Option<&Path>) -> Result<()> {
        self.manifest.wall_time_s = (self.start.elapsed().as_secs_f64() * 1000.0).round() / 1000.0;
        if let Some(path) = out {
            self.manifest.outputs.push(path.display().to_string());
        }
        let report = serde_json::json!({ "manifest": self.manifest, "results": results });
        let text = serde_json::to_string_pretty(&report)? + "\n";
        match out {
            Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
            None => print!("{text}"),
        }
        Ok(())
    }
}
