//! Histogram serialization.
//!
//! CSV: `path,label,scheme,P,R,b_0,...,b_{N-1}`, bins with 17 significant digits.
//!
//! Binary record (little-endian):
//!
//! ```text
//! "CLDPH1" | u32 P | u32 R | u32 group count | u32 dims[group count] | f64 bins[Σ dims]
//! ```
//!
//! Records can be concatenated; [`read_binary`] consumes one at a time.

use std::io::Write;

use super::FeatureHistogram;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 6] = b"CLDPH1";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_bin(value: f64) -> String {
    format!("{value:.16e}")
}

pub fn format_radius(radius: f64) -> String {
    if radius.fract() == 0.0 {
        format!("{radius:.0}")
    } else {
        radius.to_string()
    }
}

/// Appends one CSV line (with trailing newline). `label` may be absent for single images.
pub fn write_csv_line(out: &mut impl Write, path: &str, label: Option<usize>, hist: &FeatureHistogram) -> std::io::Result<()> {
    if path.contains(',') || path.contains('\n') {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("path {path:?} cannot be written to CSV"),
        ));
    }
    let label = label.map(|l| l.to_string()).unwrap_or_default();
    write!(
        out,
        "{path},{label},{},{},{}",
        hist.scheme,
        hist.neighbors,
        format_radius(hist.radius)
    )?;
    for &b in &hist.bins {
        write!(out, ",{}", format_bin(b))?;
    }
    writeln!(out)
}

fn integral_u32(value: f64, what: &str) -> Result<u32> {
    if value.fract() != 0.0 || !(0.0..=f64::from(u32::MAX)).contains(&value) {
        return Err(Error::Parameter(format!(
            "binary histograms store integral {what}, got {value}"
        )));
    }
    Ok(value as u32)
}

pub fn write_binary(out: &mut Vec<u8>, hist: &FeatureHistogram) -> Result<()> {
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(hist.neighbors as u32).to_le_bytes());
    out.extend_from_slice(&integral_u32(hist.radius, "radius")?.to_le_bytes());
    out.extend_from_slice(&(hist.dims.len() as u32).to_le_bytes());
    for &d in &hist.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &b in &hist.bins {
        out.extend_from_slice(&b.to_le_bytes());
    }
    Ok(())
}

/// One decoded binary record. The scheme itself is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryHistogram {
    pub neighbors: usize,
    pub radius: u32,
    pub dims: Vec<usize>,
    pub bins: Vec<f64>,
}

/// Decodes the record at the start of `bytes`; returns it with the bytes consumed.
pub fn read_binary(bytes: &[u8]) -> Result<(BinaryHistogram, usize)> {
    let mut pos = 0;
    let mut take = |n: usize| -> Result<&[u8]> {
        let chunk = bytes
            .get(pos..pos + n)
            .ok_or_else(|| Error::format(pos, "truncated histogram record"))?;
        pos += n;
        Ok(chunk)
    };
    if take(6)? != BINARY_MAGIC {
        return Err(Error::format(0, "expected magic \"CLDPH1\""));
    }
    let mut u32_field = || -> Result<u32> { take(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes"))) };
    let neighbors = u32_field()? as usize;
    let radius = u32_field()?;
    let groups = u32_field()? as usize;
    if groups > 4 {
        return Err(Error::format(14, format!("{groups} groups (at most 4 components exist)")));
    }
    let dims = (0..groups)
        .map(|_| u32_field().map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = dims.iter().sum();
    let raw = take(8 * total)?;
    let bins = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    Ok((
        BinaryHistogram {
            neighbors,
            radius,
            dims,
            bins,
        },
        pos,
    ))
}
