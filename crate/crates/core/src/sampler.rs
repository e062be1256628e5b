//! Circular neighborhood sampling.
//!
//! Neighbor `p` of a center sits at `(-R sin θp, R cos θp)` with
//! `θp = 2πp/P`: `p = 0` points down the raster (+y) and indices advance
//! counter-clockwise as seen on screen. Coordinates within [`SNAP_TOLERANCE`]
//! of an integer are snapped onto that pixel; everything else is bilinearly
//! interpolated from the four surrounding pixels.
//!
//! When `4 | P` only the first quadrant is computed with trigonometry and the
//! other three are exact 90° rotations of its tap stencils (same weights, same
//! tap order). Rotating an image by 90° therefore permutes sampled values
//! bit-for-bit, which is what makes rotation invariance exact rather than
//! approximate.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Distance to an integer below which a sampling coordinate is snapped.
pub const SNAP_TOLERANCE: f64 = 1e-6;

/// Local differences smaller than this fraction of `Σ|w·Δ|` are rounding
/// noise around an exact zero and are reported as `0.0`.
pub const ZERO_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub dx: i32,
    pub dy: i32,
    pub weight: f64,
}

/// One sampling point: its continuous displacement and interpolation stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct Offset {
    pub dx: f64,
    pub dy: f64,
    /// Always four taps; snapped axes leave zero-weight taps on the center.
    pub taps: [Tap; 4],
}

impl Offset {
    fn from_position(dx: f64, dy: f64) -> Offset {
        let axis = |v: f64| -> [(i32, f64); 2] {
            let r = v.round();
            if (v - r).abs() < SNAP_TOLERANCE {
                [(r as i32, 1.0), (0, 0.0)]
            } else {
                let fl = v.floor();
                let f = v - fl;
                [(fl as i32, 1.0 - f), (fl as i32 + 1, f)]
            }
        };
        let (xs, ys) = (axis(dx), axis(dy));
        let snapped = |v: f64| {
            let r = v.round();
            if (v - r).abs() < SNAP_TOLERANCE {
                r + 0.0
            } else {
                v
            }
        };
        let tap = |(x, wx): (i32, f64), (y, wy): (i32, f64)| {
            let weight = wx * wy;
            if weight == 0.0 {
                Tap { dx: 0, dy: 0, weight: 0.0 }
            } else {
                Tap { dx: x, dy: y, weight }
            }
        };
        Offset {
            dx: snapped(dx),
            dy: snapped(dy),
            taps: [tap(xs[0], ys[0]), tap(xs[1], ys[0]), tap(xs[0], ys[1]), tap(xs[1], ys[1])],
        }
    }

    /// The same stencil turned a quarter turn in the direction of increasing `p`.
    fn quarter_turn(&self) -> Offset {
        Offset {
            dx: -self.dy + 0.0,
            dy: self.dx,
            taps: self.taps.map(|t| Tap {
                dx: -t.dy,
                dy: t.dx,
                weight: t.weight,
            }),
        }
    }
}

/// `P` sampling points evenly spaced on a circle of radius `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGeometry {
    neighbors: usize,
    radius: f64,
    offsets: Vec<Offset>,
}

impl SamplingGeometry {
    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    /// Border margin every center needs so that all taps stay in bounds.
    pub fn margin(&self) -> usize {
        margin(self.radius)
    }

    /// Local differences `d_p` at center `(x, y)` without bounds checks
    /// beyond slice indexing. Callers guarantee `(x, y)` is interior.
    #[inline]
    pub(crate) fn diffs_into(&self, img: &GrayImage, x: usize, y: usize, out: &mut [f64]) {
        let width = img.width() as isize;
        let data = img.data();
        let at = y as isize * width + x as isize;
        let center = data[at as usize];
        for (slot, offset) in out.iter_mut().zip(&self.offsets) {
            let mut d = 0.0;
            let mut mass = 0.0;
            for tap in &offset.taps {
                let v = data[(at + tap.dy as isize * width + tap.dx as isize) as usize];
                let term = tap.weight * (v - center);
                d += term;
                mass += term.abs();
            }
            *slot = if d.abs() <= ZERO_TOLERANCE * mass { 0.0 } else { d };
        }
    }
}

impl fmt::Display for SamplingGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(P={}, R={})", self.neighbors, self.radius)
    }
}

fn margin(radius: f64) -> usize {
    radius.ceil() as usize
}

/// Builds the sampling stencil for `P` neighbors at radius `R`.
pub fn make_geometry(neighbors: usize, radius: f64) -> Result<SamplingGeometry> {
    if neighbors < 4 {
        return Err(Error::Parameter(format!("P must be at least 4, got {neighbors}")));
    }
    if neighbors > 32 {
        return Err(Error::Parameter(format!("P must be at most 32, got {neighbors}")));
    }
    if !radius.is_finite() || radius < 1.0 {
        return Err(Error::Parameter(format!("R must be at least 1, got {radius}")));
    }
    let position = |p: usize| {
        let theta = 2.0 * PI * p as f64 / neighbors as f64;
        Offset::from_position(-radius * theta.sin(), radius * theta.cos())
    };
    let offsets = if neighbors.is_multiple_of(4) {
        let quarter = neighbors / 4;
        let mut offsets: Vec<Offset> = (0..quarter).map(position).collect();
        for p in quarter..neighbors {
            let turned = offsets[p - quarter].quarter_turn();
            offsets.push(turned);
        }
        offsets
    } else {
        (0..neighbors).map(position).collect()
    };
    Ok(SamplingGeometry {
        neighbors,
        radius,
        offsets,
    })
}

/// Interpolated neighbors of one center together with their local differences.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodSample {
    pub center: f64,
    pub neighbors: Vec<f64>,
    pub diffs: Vec<f64>,
}

impl NeighborhoodSample {
    pub fn len(&self) -> usize {
        self.diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// Inclusive rectangle of valid centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Region {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn count(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x in [{}, {}], y in [{}, {}]", self.x0, self.x1, self.y0, self.y1)
    }
}

/// Centers whose radius-`R` taps all fall inside the image.
pub fn valid_region(img: &GrayImage, radius: f64) -> Result<Region> {
    let m = margin(radius);
    let (w, h) = (img.width(), img.height());
    if w < 2 * m + 1 || h < 2 * m + 1 {
        return Err(Error::EmptyRegion {
            width: w,
            height: h,
            radius,
        });
    }
    Ok(Region {
        x0: m,
        y0: m,
        x1: w - 1 - m,
        y1: h - 1 - m,
    })
}

/// Samples the circular neighborhood of `(x, y)`; no clamping or wrapping.
pub fn sample_at(img: &GrayImage, geom: &SamplingGeometry, x: usize, y: usize) -> Result<NeighborhoodSample> {
    let region = valid_region(img, geom.radius)?;
    if !region.contains(x, y) {
        return Err(Error::Bounds {
            x,
            y,
            region: region.to_string(),
        });
    }
    let center = img.get(x, y);
    let neighbors = geom
        .offsets
        .iter()
        .map(|o| {
            o.taps
                .iter()
                .map(|t| t.weight * img.get((x as i32 + t.dx) as usize, (y as i32 + t.dy) as usize))
                .sum()
        })
        .collect();
    let mut diffs = vec![0.0; geom.neighbors];
    geom.diffs_into(img, x, y, &mut diffs);
    Ok(NeighborhoodSample {
        center,
        neighbors,
        diffs,
    })
}
