use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{input, internal, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL: &str = "trichome";

/// Top-level wrapper shared by every JSON output.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub config_hash: String,
    pub config: Value,
    pub result: T,
}

pub fn config_hash(config: &Value) -> String {
    // serde_json maps are ordered, so this is canonical for a given struct
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

pub fn envelope<'a, T: Serialize>(command: &'a str, seed: u64, config: &impl Serialize, result: T) -> Envelope<'a, T> {
    let config = serde_json::to_value(config).expect("config serializes");
    Envelope {
        schema_version: SCHEMA_VERSION,
        tool: TOOL,
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config_hash: config_hash(&config),
        config,
        result,
    }
}

pub fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| input(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| internal(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| internal(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

/// Writes a CSV with a header row and string cells.
pub fn write_csv(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let err = |e: csv::Error| internal(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush()
        .map_err(|e| internal(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
