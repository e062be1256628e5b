//! Grayscale rasters and the 8-bit file formats they are loaded from.
//!
//! Pixels are promoted to `f64` on load so that every downstream operator
//! runs in real arithmetic.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exact::{exact_sum, ExactSum};

/// Row-major grayscale image with real-valued intensities.
#[derive(Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Parameter(format!(
                "{width}x{height} image needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Applies `f` to every intensity.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rotates the raster by 90° counter-clockwise (as displayed, y down).
    ///
    /// Source pixel `(x, y)` lands at `(y, width - 1 - x)`.
    pub fn rot90(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (nx, ny) = (y, w - 1 - x);
                data[ny * h + nx] = self.get(x, y);
            }
        }
        GrayImage {
            width: h,
            height: w,
            data,
        }
    }

    /// Quantizes to 8 bits (round half away from zero, clamp to [0, 255]).
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Arithmetic mean over every pixel of the image.
pub fn image_mean(img: &GrayImage) -> f64 {
    exact_sum(img.data.iter().copied()) / img.data.len() as f64
}

/// Optional gray-level normalization applied right after loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Normalization {
    #[default]
    None,
    /// Rescale to mean 128 and standard deviation 20.
    Mean128Std20,
}

impl Normalization {
    pub fn apply(self, img: &GrayImage) -> GrayImage {
        match self {
            Normalization::None => img.clone(),
            Normalization::Mean128Std20 => {
                let mean = image_mean(img);
                let var = img
                    .data
                    .iter()
                    .map(|&v| (v - mean) * (v - mean))
                    .collect::<ExactSum>()
                    .value()
                    / img.data.len() as f64;
                let std = var.sqrt();
                if std == 0.0 {
                    img.map(|_| 128.0)
                } else {
                    img.map(|v| (v - mean) / std * 20.0 + 128.0)
                }
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::Mean128Std20 => "mean128-std20",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "mean128-std20" => Ok(Normalization::Mean128Std20),
            other => Err(Error::Parameter(format!(
                "unknown normalization {other:?} (expected none or mean128-std20)"
            ))),
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads a PGM, BMP or Sun raster file, chosen by extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    decode_image(path, &read_file(path)?)
}

/// Decodes already-read file bytes, using `path` only for the extension.
pub fn decode_image(path: &Path, bytes: &[u8]) -> Result<GrayImage> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pgm") => decode_pgm(bytes),
        Some("bmp") => decode_bmp8(bytes),
        Some("ras") => decode_ras8(bytes),
        _ => Err(Error::UnsupportedFormat(format!(
            "{} (expected .pgm, .bmp or .ras)",
            path.display()
        ))),
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&read_file(path.as_ref())?)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start, format!("{what} out of range")))
    }
}

/// Decodes a binary (P5) 8-bit PGM.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::format(0, "expected magic \"P5\""));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_space_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            maxval_at,
            format!("maxval {maxval} is not an 8-bit value"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(2, "zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(Error::format(cur.pos, "missing whitespace after maxval"));
    }
    let start = cur.pos + 1;
    let needed = width * height;
    let available = bytes.len() - start;
    if available < needed {
        return Err(Error::format(
            bytes.len(),
            format!("truncated raster: expected {needed} bytes, found {available}"),
        ));
    }
    GrayImage::from_bytes(width, height, &bytes[start..start + needed])
}

/// Encodes the image as binary 8-bit PGM.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.to_bytes());
    out
}

/// Writes a binary PGM atomically (temp file + rename).
pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    crate::suite::cache::write_atomic(path.as_ref(), &encode_pgm(img))
}

pub fn load_bmp8(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_bmp8(&read_file(path.as_ref())?)
}

fn le_u16(bytes: &[u8], at: usize) -> Result<u16> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| Error::format(at, "truncated BMP header"))
}

fn le_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(at, "truncated BMP header"))
}

/// Identity gray ramps map indices to themselves; other palettes go through
/// Rec. 601 luma, rounded half up.
fn palette_gray(entries: impl Iterator<Item = [u8; 3]>) -> Vec<f64> {
    let entries: Vec<[u8; 3]> = entries.collect();
    let identity = entries.iter().enumerate().all(|(i, c)| c.iter().all(|&v| v as usize == i));
    entries
        .iter()
        .enumerate()
        .map(|(i, &[r, g, b])| {
            if identity {
                i as f64
            } else {
                let (r, g, b) = (u32::from(r), u32::from(g), u32::from(b));
                f64::from((299 * r + 587 * g + 114 * b + 500) / 1000)
            }
        })
        .collect()
}

/// Decodes an uncompressed 8-bit palettized BMP.
///
/// An identity gray ramp palette maps indices straight to intensities; any
/// other palette is collapsed through Rec. 601 luma, rounded half up.
pub fn decode_bmp8(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || &bytes[..2] != b"BM" {
        return Err(Error::format(0, "expected magic \"BM\""));
    }
    let pixel_offset = le_u32(bytes, 10)? as usize;
    let dib_size = le_u32(bytes, 14)? as usize;
    if dib_size < 40 {
        return Err(Error::UnsupportedFormat(format!(
            "BMP info header of {dib_size} bytes (OS/2 bitmaps are not supported)"
        )));
    }
    let width = le_u32(bytes, 18)? as i32;
    let height = le_u32(bytes, 22)? as i32;
    let bpp = le_u16(bytes, 28)?;
    let compression = le_u32(bytes, 30)?;
    if bpp != 8 {
        return Err(Error::UnsupportedFormat(format!("{bpp}-bit BMP")));
    }
    if compression != 0 {
        return Err(Error::UnsupportedFormat(format!(
            "compressed BMP (compression type {compression})"
        )));
    }
    if width <= 0 || height == 0 {
        return Err(Error::format(18, "invalid BMP dimensions"));
    }
    let colors = match le_u32(bytes, 46)? {
        0 => 256,
        n if n <= 256 => n as usize,
        n => return Err(Error::format(46, format!("palette of {n} entries"))),
    };
    let palette_at = 14 + dib_size;
    let palette = bytes
        .get(palette_at..palette_at + 4 * colors)
        .ok_or_else(|| Error::format(palette_at, "truncated palette"))?;
    let gray = palette_gray(palette.chunks_exact(4).map(|c| [c[2], c[1], c[0]]));

    let w = width as usize;
    let h = height.unsigned_abs() as usize;
    let bottom_up = height > 0;
    let stride = w.div_ceil(4) * 4;
    let end = pixel_offset + stride * h;
    if end > bytes.len() {
        return Err(Error::format(
            bytes.len(),
            format!("truncated raster: expected {} bytes", stride * h),
        ));
    }
    let mut data = Vec::with_capacity(w * h);
    for row in 0..h {
        let disk_row = if bottom_up { h - 1 - row } else { row };
        let at = pixel_offset + disk_row * stride;
        for (col, &index) in bytes[at..at + w].iter().enumerate() {
            let v = gray.get(index as usize).ok_or_else(|| {
                Error::format(at + col, format!("palette index {index} out of range"))
            })?;
            data.push(*v);
        }
    }
    GrayImage::new(w, h, data)
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(at, "truncated Sun raster header"))
}

/// Decodes an 8-bit Sun raster (`.ras`), raw or byte-run-length encoded.
///
/// Rows are padded to 16 bits. An RGB colormap is collapsed like a BMP palette.
pub fn decode_ras8(bytes: &[u8]) -> Result<GrayImage> {
    if be_u32(bytes, 0)? != 0x59a6_6a95 {
        return Err(Error::format(0, "expected Sun raster magic 0x59a66a95"));
    }
    let (width, height, depth) = (be_u32(bytes, 4)? as usize, be_u32(bytes, 8)? as usize, be_u32(bytes, 12)?);
    let (kind, map_type, map_len) = (be_u32(bytes, 20)?, be_u32(bytes, 24)?, be_u32(bytes, 28)? as usize);
    if depth != 8 {
        return Err(Error::UnsupportedFormat(format!("{depth}-bit Sun raster")));
    }
    if kind > 2 {
        return Err(Error::UnsupportedFormat(format!("Sun raster type {kind}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(4, "invalid Sun raster dimensions"));
    }
    let map = bytes
        .get(32..32 + map_len)
        .ok_or_else(|| Error::format(32, "truncated colormap"))?;
    let gray: Vec<f64> = match (map_type, map_len) {
        (_, 0) => (0..256).map(f64::from).collect(),
        (1, n) if n % 3 == 0 && n <= 768 => {
            let k = n / 3;
            palette_gray((0..k).map(|i| [map[i], map[k + i], map[2 * k + i]]))
        }
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "Sun raster colormap type {map_type} of {map_len} bytes"
            )))
        }
    };
    let stride = width + width % 2;
    let body_at = 32 + map_len;
    let body = &bytes[body_at..];
    let raster: Vec<u8> = if kind == 2 {
        let mut out = Vec::with_capacity(stride * height);
        let mut i = 0;
        while out.len() < stride * height {
            let b = *body.get(i).ok_or_else(|| Error::format(body_at + i, "truncated run-length data"))?;
            if b != 0x80 {
                out.push(b);
                i += 1;
                continue;
            }
            match body.get(i + 1) {
                Some(0) => {
                    out.push(0x80);
                    i += 2;
                }
                Some(&n) => {
                    let v = *body.get(i + 2).ok_or_else(|| Error::format(body_at + i, "truncated run"))?;
                    out.extend(std::iter::repeat_n(v, usize::from(n) + 1));
                    i += 3;
                }
                None => return Err(Error::format(body_at + i, "truncated run")),
            }
        }
        out.truncate(stride * height);
        out
    } else {
        body.get(..stride * height)
            .ok_or_else(|| Error::format(bytes.len(), format!("truncated raster: expected {} bytes", stride * height)))?
            .to_vec()
    };
    let mut data = Vec::with_capacity(width * height);
    for (row, line) in raster.chunks_exact(stride).enumerate() {
        for (col, &index) in line[..width].iter().enumerate() {
            let v = gray.get(usize::from(index)).ok_or_else(|| {
                Error::format(body_at + row * stride + col, format!("colormap index {index} out of range"))
            })?;
            data.push(*v);
        }
    }
    GrayImage::new(width, height, data)
}
