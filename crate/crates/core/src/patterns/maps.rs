use rayon::prelude::*;

use super::encode::threshold_bits;
use super::{Component, Riu2Mapper};
use crate::error::{Error, Result};
use crate::exact::ExactSum;
use crate::image::{image_mean, GrayImage};
use crate::sampler::{make_geometry, valid_region, Region, SamplingGeometry};

/// Per-center component codes over the valid region of one image.
///
/// All maps are row-major over `region`. `S`, `M` and `D` hold riu2 bins,
/// `C` holds 0/1.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternMaps {
    pub neighbors: usize,
    pub radius: f64,
    pub region: Region,
    pub sign: Vec<u8>,
    pub magnitude: Vec<u8>,
    pub derivative: Option<Vec<u8>>,
    pub center: Vec<u8>,
    /// Mean `|d_p|` at the outer radius, as used for `M`.
    pub mean_magnitude: f64,
    /// Mean image intensity, as used for `C`.
    pub mean_intensity: f64,
}

impl PatternMaps {
    pub fn len(&self) -> usize {
        self.sign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sign.is_empty()
    }

    pub fn component(&self, c: Component) -> Option<&[u8]> {
        match c {
            Component::S => Some(&self.sign),
            Component::M => Some(&self.magnitude),
            Component::D => self.derivative.as_deref(),
            Component::C => Some(&self.center),
        }
    }

    /// Diagnostic rendering of each map as an 8-bit image.
    ///
    /// riu2 bins are scaled by `⌊255 / (P + 1)⌋`; the center bit becomes 0 or 255.
    pub fn debug_images(&self) -> Vec<(Component, GrayImage)> {
        let (w, h) = (self.region.width(), self.region.height());
        let scale = f64::from((255 / (self.neighbors + 1)) as u32);
        Component::ALL
            .iter()
            .filter_map(|&c| {
                let map = self.component(c)?;
                let factor = if c == Component::C { 255.0 } else { scale };
                let img = GrayImage::new(w, h, map.iter().map(|&b| f64::from(b) * factor).collect())
                    .expect("map matches region");
                Some((c, img))
            })
            .collect()
    }
}

/// Reusable extractor for one `(P, R)` configuration.
#[derive(Debug, Clone)]
pub struct Extractor {
    outer: SamplingGeometry,
    inner: Option<SamplingGeometry>,
    mapper: Riu2Mapper,
}

impl Extractor {
    /// `with_derivative` requires `R >= 2` so that the inner circle has radius at least 1.
    pub fn new(neighbors: usize, radius: f64, with_derivative: bool) -> Result<Self> {
        Self::with_mapper(neighbors, radius, with_derivative, Riu2Mapper::new(neighbors)?)
    }

    pub fn with_mapper(neighbors: usize, radius: f64, with_derivative: bool, mapper: Riu2Mapper) -> Result<Self> {
        if mapper.width() != neighbors {
            return Err(Error::Parameter(format!(
                "mapper built for P={} used with P={neighbors}",
                mapper.width()
            )));
        }
        if with_derivative && (radius.is_nan() || radius < 2.0) {
            return Err(Error::Parameter(format!(
                "the derivative component needs R >= 2 (inner radius R-1 >= 1), got R={radius}"
            )));
        }
        let outer = make_geometry(neighbors, radius)?;
        let inner = if with_derivative {
            Some(make_geometry(neighbors, radius - 1.0)?)
        } else {
            None
        };
        Ok(Self { outer, inner, mapper })
    }

    pub fn neighbors(&self) -> usize {
        self.outer.neighbors()
    }

    pub fn radius(&self) -> f64 {
        self.outer.radius()
    }

    pub fn has_derivative(&self) -> bool {
        self.inner.is_some()
    }

    /// Two passes over the valid region: the first encodes `S`, `D`, `C` and
    /// collects `|d_p|`; the second thresholds those magnitudes against their
    /// exact mean to encode `M`.
    pub fn extract(&self, img: &GrayImage) -> Result<PatternMaps> {
        let region = valid_region(img, self.outer.radius())?;
        let p = self.neighbors();
        let (rw, rh) = (region.width(), region.height());
        let n = region.count();
        let mean_intensity = image_mean(img);

        let mut sign = vec![0u8; n];
        let mut derivative = self.inner.as_ref().map(|_| vec![0u8; n]);
        let mut center = vec![0u8; n];
        let mut magnitudes = vec![0.0f64; n * p];

        let row_sums: Vec<ExactSum> = {
            let mut derivative_rows: Vec<Option<&mut [u8]>> = match derivative.as_mut() {
                Some(d) => d.chunks_mut(rw).map(Some).collect(),
                None => (0..rh).map(|_| None).collect(),
            };
            sign.par_chunks_mut(rw)
                .zip(center.par_chunks_mut(rw))
                .zip(magnitudes.par_chunks_mut(rw * p))
                .zip(derivative_rows.par_iter_mut())
                .enumerate()
                .map(|(row, (((sign_row, center_row), mag_row), deriv_row))| {
                    let y = region.y0 + row;
                    let mut outer = vec![0.0; p];
                    let mut inner = vec![0.0; p];
                    let mut sum = ExactSum::new();
                    for col in 0..rw {
                        let x = region.x0 + col;
                        self.outer.diffs_into(img, x, y, &mut outer);
                        let outer_bits = threshold_bits(outer.iter().copied(), 0.0);
                        sign_row[col] = self.mapper.bin(outer_bits);
                        center_row[col] = u8::from(img.get(x, y) >= mean_intensity);
                        if let (Some(geom), Some(d)) = (&self.inner, deriv_row.as_deref_mut()) {
                            geom.diffs_into(img, x, y, &mut inner);
                            let inner_bits = threshold_bits(inner.iter().copied(), 0.0);
                            d[col] = self.mapper.bin(outer_bits ^ inner_bits);
                        }
                        let mags = &mut mag_row[col * p..(col + 1) * p];
                        for (m, d) in mags.iter_mut().zip(&outer) {
                            *m = d.abs();
                            sum.add(*m);
                        }
                    }
                    sum
                })
                .collect()
        };
        let mut total = ExactSum::new();
        for s in &row_sums {
            total.merge(s);
        }
        let mean_magnitude = total.value() / (n * p) as f64;

        let mut magnitude = vec![0u8; n];
        magnitude
            .par_iter_mut()
            .zip(magnitudes.par_chunks(p))
            .for_each(|(bin, mags)| {
                *bin = self.mapper.bin(threshold_bits(mags.iter().copied(), mean_magnitude));
            });

        Ok(PatternMaps {
            neighbors: p,
            radius: self.outer.radius(),
            region,
            sign,
            magnitude,
            derivative,
            center,
            mean_magnitude,
            mean_intensity,
        })
    }
}

/// Extracts all component maps; `D` is included whenever `R >= 2`.
pub fn extract_maps(img: &GrayImage, neighbors: usize, radius: f64, mapper: &Riu2Mapper) -> Result<PatternMaps> {
    Extractor::with_mapper(neighbors, radius, radius >= 2.0, mapper.clone())?.extract(img)
}
