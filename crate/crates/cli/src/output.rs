use std::path::{Path, PathBuf};

use chanspec::{Error, KrausSet, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn channel_hash(k: &KrausSet) -> Result<String> {
    Ok(sha256_hex(k.to_json()?.as_bytes()))
}

/// Files are collected first and written together, so a failed run leaves
/// nothing behind.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.files.push((path, bytes.into()));
    }

    pub fn write(self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (path, bytes) in self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, bytes)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Serialize)]
pub struct Manifest {
    pub seed: u64,
    #[serde(rename = "S")]
    pub samples: u64,
    #[serde(rename = "N")]
    pub cycles: usize,
    pub channel_hash: String,
    pub config_path: Option<String>,
    pub threads: Option<usize>,
    pub created_unix: u64,
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// CSV with header `m,<name>[,p_<outcome>]`, m counted from 1.
pub fn signal_csv(name: &str, f: &[f64], exact: Option<(&str, &[f64])>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["m".to_string(), name.to_string()];
    if let Some((p, _)) = exact {
        header.push(p.to_string());
    }
    w.write_record(&header).map_err(csv_error)?;
    for (k, v) in f.iter().enumerate() {
        let mut row = vec![(k + 1).to_string(), v.to_string()];
        if let Some((_, p)) = exact {
            row.push(p[k].to_string());
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Reads one signal column. Without `column`, takes the first column whose
/// name starts with `f_`, else the first column after `m`.
pub fn read_signal(path: &Path, column: Option<&str>) -> Result<(String, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let headers: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let idx = match column {
        Some(c) => headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| Error::Parse(format!("{}: no column `{c}` (have {})", path.display(), headers.join(", "))))?,
        None => headers
            .iter()
            .position(|h| h.starts_with("f_"))
            .or(if headers.len() > 1 { Some(1) } else { None })
            .ok_or_else(|| Error::Parse(format!("{}: expected a header like m,f_1", path.display())))?,
    };
    let mut values = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let field = rec
            .get(idx)
            .ok_or_else(|| Error::Parse(format!("{}: row {} has no column {}", path.display(), line + 2, headers[idx])))?;
        let v: f64 = field
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("{}: row {}: `{field}` is not a number", path.display(), line + 2)))?;
        values.push(v);
    }
    Ok((headers[idx].clone(), values))
}
