use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const VERSION: &str = concat!("flywheel ", env!("CARGO_PKG_VERSION"));

/// A file to be written once the whole experiment has succeeded.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub fn json_artifact<T: Serialize>(name: &str, experiment: &str, cfg: &ExperimentConfig, result: &T) -> Result<Artifact, CliError> {
    let doc = json!({
        "version": VERSION,
        "experiment": experiment,
        "config": cfg,
        "result": result,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(Artifact {
        name: name.into(),
        bytes,
    })
}

/// Full round-trip precision.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Csv {
    lines: Vec<String>,
}

impl Csv {
    /// Starts with comment lines carrying the version and resolved config.
    pub fn new(cfg: &ExperimentConfig, columns: &[&str]) -> Result<Self, CliError> {
        let config = serde_json::to_string(cfg).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Self {
            lines: vec![format!("# {VERSION}"), format!("# config {config}"), columns.join(",")],
        })
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn finish(self, name: &str) -> Artifact {
        let mut text = self.lines.join("\n");
        text.push('\n');
        Artifact {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }
}

pub fn text_artifact(name: &str, text: &str) -> Artifact {
    Artifact {
        name: name.into(),
        bytes: text.as_bytes().to_vec(),
    }
}

/// Write everything, then `metadata.json` with the wall-clock time. Files
/// are staged under a temporary name and renamed so a crash leaves no
/// half-written result behind.
pub fn write_all(dir: &Path, experiment: &str, artifacts: &[Artifact]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let names: Vec<&str> = artifacts.iter().map(|a| a.name.as_str()).collect();
    let meta = json!({
        "version": VERSION,
        "experiment": experiment,
        "generated_unix_seconds": stamp,
        "files": names,
    });
    let mut meta_bytes = serde_json::to_vec_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))?;
    meta_bytes.push(b'\n');
    let all: Vec<(&str, &[u8])> = artifacts
        .iter()
        .map(|a| (a.name.as_str(), a.bytes.as_slice()))
        .chain(std::iter::once(("metadata.json", meta_bytes.as_slice())))
        .collect();
    let mut staged = Vec::new();
    for (name, bytes) in &all {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = std::fs::write(&tmp, bytes) {
            for t in &staged {
                let _ = std::fs::remove_file(t);
            }
            let _ = std::fs::remove_file(&tmp);
            return Err(io(e));
        }
        staged.push(tmp);
    }
    for ((name, _), tmp) in all.iter().zip(&staged) {
        std::fs::rename(tmp, dir.join(name)).map_err(io)?;
    }
    Ok(())
}

/// Drop the averaged density matrices from an ensemble summary.
pub fn strip_states(mut v: Value) -> Value {
    if let Some(cps) = v.get_mut("checkpoints").and_then(Value::as_array_mut) {
        for cp in cps {
            if let Some(o) = cp.as_object_mut() {
                o.remove("mean_state");
            }
        }
    }
    v
}
