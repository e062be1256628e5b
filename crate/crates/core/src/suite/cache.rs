//! On-disk feature cache.
//!
//! Entries live at `<dir>/<key[..2]>/<key>.{maps,hist}` where `key` is the
//! SHA-256 of the image content hash plus every parameter that influences
//! the payload. Each file is
//!
//! ```text
//! "CLDPC1" | key digest (32 bytes) | payload SHA-256 (32 bytes) | payload
//! ```
//!
//! `.hist` payloads use the binary histogram record format. Writes go to a
//! temporary file in the target directory and are renamed into place, so
//! readers never observe partial entries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::patterns::PatternMaps;
use crate::sampler::Region;

const ENTRY_MAGIC: &[u8; 6] = b"CLDPC1";
const MAPS_MAGIC: &[u8; 6] = b"CLDPM1";

/// Writes `bytes` to `path` via temp file + rename, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Maps,
    Hist,
}

impl EntryKind {
    fn extension(self) -> &'static str {
        match self {
            EntryKind::Maps => "maps",
            EntryKind::Hist => "hist",
        }
    }
}

/// Cache key: digest of a `\0`-joined description of the entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheKey([u8; 32]);

impl CacheKey {
    pub fn new(parts: &[&str]) -> Self {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p.as_bytes());
            h.update([0u8]);
        }
        CacheKey(h.finalize().into())
    }

    pub fn hex(&self) -> String {
        hex::encode(self.0)
    }
}

#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, key: &CacheKey, kind: EntryKind) -> PathBuf {
        let hex = key.hex();
        self.dir.join(&hex[..2]).join(format!("{hex}.{}", kind.extension()))
    }

    /// Returns the payload, `None` when absent, or a cache error naming `sample`.
    pub fn get(&self, key: &CacheKey, kind: EntryKind, sample: &str) -> Result<Option<Vec<u8>>> {
        let path = self.entry_path(key, kind);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let corrupt = |message: &str| Error::Cache {
            sample: sample.to_string(),
            message: format!("{message} in {}", path.display()),
        };
        if bytes.len() < 70 || &bytes[..6] != ENTRY_MAGIC {
            return Err(corrupt("bad header"));
        }
        if bytes[6..38] != key.0 {
            return Err(corrupt("key mismatch"));
        }
        let payload = &bytes[70..];
        if Sha256::digest(payload).as_slice() != &bytes[38..70] {
            return Err(corrupt("payload hash mismatch"));
        }
        Ok(Some(payload.to_vec()))
    }

    pub fn put(&self, key: &CacheKey, kind: EntryKind, payload: &[u8]) -> Result<()> {
        let mut bytes = Vec::with_capacity(70 + payload.len());
        bytes.extend_from_slice(ENTRY_MAGIC);
        bytes.extend_from_slice(&key.0);
        bytes.extend_from_slice(&Sha256::digest(payload));
        bytes.extend_from_slice(payload);
        write_atomic(&self.entry_path(key, kind), &bytes)
    }
}

pub fn encode_maps(maps: &PatternMaps) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 4 * maps.len());
    out.extend_from_slice(MAPS_MAGIC);
    out.extend_from_slice(&(maps.neighbors as u32).to_le_bytes());
    out.extend_from_slice(&maps.radius.to_le_bytes());
    for v in [maps.region.x0, maps.region.y0, maps.region.x1, maps.region.y1] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&maps.mean_magnitude.to_le_bytes());
    out.extend_from_slice(&maps.mean_intensity.to_le_bytes());
    out.push(u8::from(maps.derivative.is_some()));
    out.extend_from_slice(&maps.sign);
    out.extend_from_slice(&maps.magnitude);
    if let Some(d) = &maps.derivative {
        out.extend_from_slice(d);
    }
    out.extend_from_slice(&maps.center);
    out
}

pub fn decode_maps(bytes: &[u8]) -> Result<PatternMaps> {
    let bad = |at: usize, m: &str| Error::format(at, format!("pattern maps: {m}"));
    if bytes.len() < 55 || &bytes[..6] != MAPS_MAGIC {
        return Err(bad(0, "bad header"));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let f64_at = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let neighbors = u32_at(6);
    let radius = f64_at(10);
    let region = Region {
        x0: u32_at(18),
        y0: u32_at(22),
        x1: u32_at(26),
        y1: u32_at(30),
    };
    if region.x1 < region.x0 || region.y1 < region.y0 {
        return Err(bad(18, "inverted region"));
    }
    let mean_magnitude = f64_at(34);
    let mean_intensity = f64_at(42);
    let has_derivative = bytes[50] == 1;
    let n = region.count();
    let planes = if has_derivative { 4 } else { 3 };
    if bytes.len() != 51 + planes * n {
        return Err(bad(51, "payload length does not match region"));
    }
    let plane = |i: usize| bytes[51 + i * n..51 + (i + 1) * n].to_vec();
    Ok(PatternMaps {
        neighbors,
        radius,
        region,
        sign: plane(0),
        magnitude: plane(1),
        derivative: has_derivative.then(|| plane(2)),
        center: plane(planes - 1),
        mean_magnitude,
        mean_intensity,
    })
}
