use std::io::Read;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use volentropy::series::{read_prices, read_returns, to_log_returns};
use volentropy::{ColumnMapping, ReturnSeries};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub struct LoadedInput {
    pub series: ReturnSeries,
    pub digest: InputDigest,
}

/// Series label: the file stem, or `stdin`.
fn series_id(path: &str) -> String {
    if path == "-" {
        return "stdin".into();
    }
    Path::new(path).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.to_string())
}

fn read_bytes(path: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    if path == "-" {
        std::io::stdin().read_to_end(&mut buf).context("reading stdin")?;
    } else {
        buf = std::fs::read(path).with_context(|| format!("reading {path}"))?;
    }
    Ok(buf)
}

/// Loads one input as returns: prices are converted to log-returns unless
/// `returns` is set.
pub fn load(path: &str, mapping: &ColumnMapping, returns: bool) -> Result<LoadedInput> {
    let bytes = read_bytes(path)?;
    let digest = InputDigest { path: path.to_string(), sha256: hex::encode(Sha256::digest(&bytes)) };
    let id = series_id(path);
    let source = if path == "-" { "stdin" } else { path };
    let series = if returns {
        read_returns(bytes.as_slice(), mapping, &id, source)
    } else {
        read_prices(bytes.as_slice(), mapping).and_then(|p| to_log_returns(&id, source, &p))
    }
    .with_context(|| path.to_string())?;
    Ok(LoadedInput { series, digest })
}

pub fn load_all(paths: &[String], mapping: &ColumnMapping, returns: bool) -> Result<Vec<LoadedInput>> {
    if paths.iter().filter(|p| *p == "-").count() > 1 {
        anyhow::bail!("stdin can be read only once");
    }
    paths.iter().map(|p| load(p, mapping, returns)).collect()
}
