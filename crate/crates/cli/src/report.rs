//! Deterministic report emission: fixed 17-significant-digit floats, atomic
//! writes, and the run manifest.

use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process;

pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Minimal ordered JSON builder; values are pre-rendered fragments.
pub struct JsonObject {
    fields: Vec<(String, String)>,
}

impl JsonObject {
    pub fn new() -> Self {
        Self { fields: Vec::new() }
    }

    pub fn raw(mut self, key: &str, value: impl Into<String>) -> Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    pub fn f64(self, key: &str, value: f64) -> Self {
        let v = fmt_f64(value);
        self.raw(key, v)
    }

    pub fn int(self, key: &str, value: i64) -> Self {
        self.raw(key, value.to_string())
    }

    pub fn usize(self, key: &str, value: usize) -> Self {
        self.raw(key, value.to_string())
    }

    pub fn bool(self, key: &str, value: bool) -> Self {
        self.raw(key, if value { "true" } else { "false" })
    }

    pub fn string(self, key: &str, value: &str) -> Self {
        let quoted = serde_json::to_string(value).expect("string encodes");
        self.raw(key, quoted)
    }

    pub fn f64_array(self, key: &str, values: &[f64]) -> Self {
        let inner: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        self.raw(key, format!("[{}]", inner.join(",")))
    }

    pub fn finish(self) -> String {
        let mut out = String::from("{");
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "\"{k}\":{v}");
        }
        out.push('}');
        out
    }
}

/// A named pass/fail check with its measured value and threshold.
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn upper(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.to_string(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    pub fn exact_int(name: &str, value: i64, expect: i64) -> Self {
        Check {
            name: name.to_string(),
            value: value as f64,
            tolerance: expect as f64,
            pass: value == expect,
        }
    }

    pub fn to_json(&self) -> String {
        JsonObject::new()
            .f64("value", self.value)
            .f64("tolerance", self.tolerance)
            .bool("pass", self.pass)
            .finish()
    }
}

pub fn checks_json(checks: &[Check]) -> String {
    let mut obj = JsonObject::new();
    for c in checks {
        obj = obj.raw(&c.name, c.to_json());
    }
    obj.finish()
}

/// Write atomically: temp file in the same directory, then rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp-{}", process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &target)?;
    Ok(target)
}

pub fn config_sha256(config_json: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(config_json.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// `manifest.json`: command, tool version, full config, its hash, and the
/// list of artifacts written by the run.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    config_json: &str,
    outputs: &[String],
) -> std::io::Result<()> {
    let outputs_json: Vec<String> = outputs
        .iter()
        .map(|o| serde_json::to_string(o).expect("string encodes"))
        .collect();
    let manifest = JsonObject::new()
        .string("command", command)
        .string("version", env!("CARGO_PKG_VERSION"))
        .raw("config", config_json)
        .string("config_sha256", &config_sha256(config_json))
        .raw("outputs", format!("[{}]", outputs_json.join(",")))
        .finish();
    write_atomic(dir, "manifest.json", &manifest)?;
    Ok(())
}
