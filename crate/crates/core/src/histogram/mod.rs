//! Histogram fusion of component maps.
//!
//! A scheme is a list of groups. Each group is a joint histogram over the
//! Cartesian product of its components, flattened row-major in the order the
//! components are written; the groups are then concatenated. Every group is
//! normalized to unit mass so histograms of differently sized images remain
//! comparable.

pub mod export;
mod scheme;

pub use export::{read_binary, write_binary, write_csv_line, BinaryHistogram};
pub use scheme::{parse_scheme, Family, SchemeExpr};

pub use crate::patterns::Component;
use crate::error::{Error, Result};
use crate::patterns::PatternMaps;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistogram {
    pub scheme: SchemeExpr,
    pub neighbors: usize,
    pub radius: f64,
    /// Bin count of each group, in scheme order.
    pub dims: Vec<usize>,
    pub bins: Vec<f64>,
}

impl FeatureHistogram {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Bins of group `g`.
    pub fn group(&self, g: usize) -> &[f64] {
        let start: usize = self.dims[..g].iter().sum();
        &self.bins[start..start + self.dims[g]]
    }

    pub fn scaled(&self, factor: f64) -> FeatureHistogram {
        FeatureHistogram {
            bins: self.bins.iter().map(|b| b * factor).collect(),
            ..self.clone()
        }
    }
}

/// Total bin count: `Σ_groups Π_members b(c)` with `b = P + 2` for S/M/D and 2 for C.
pub fn scheme_dimension(scheme: &SchemeExpr, neighbors: usize) -> usize {
    group_dims(scheme, neighbors).iter().sum()
}

fn group_dims(scheme: &SchemeExpr, neighbors: usize) -> Vec<usize> {
    scheme
        .groups()
        .iter()
        .map(|g| g.iter().map(|c| c.bins(neighbors)).product())
        .collect()
}

/// Row-major mixed-radix index of one joint-group cell.
pub fn bin_index(group: &[Component], values: &[usize], neighbors: usize) -> usize {
    debug_assert_eq!(group.len(), values.len());
    group.iter().zip(values).fold(0, |idx, (c, &v)| {
        let radix = c.bins(neighbors);
        assert!(v < radix, "component {c} value {v} outside 0..{radix}");
        idx * radix + v
    })
}

fn check_maps(maps: &PatternMaps, scheme: &SchemeExpr) -> Result<()> {
    for c in scheme.components() {
        if maps.component(c).is_none() {
            return Err(Error::Parameter(format!(
                "scheme {scheme} needs component {c}, which was not extracted (R={})",
                maps.radius
            )));
        }
    }
    Ok(())
}

/// Raw per-group occurrence counts; each group sums to the number of valid centers.
pub fn build_counts(maps: &PatternMaps, scheme: &SchemeExpr) -> Result<Vec<Vec<u64>>> {
    check_maps(maps, scheme)?;
    let p = maps.neighbors;
    let dims = group_dims(scheme, p);
    let mut counts = Vec::with_capacity(dims.len());
    for (group, &dim) in scheme.groups().iter().zip(&dims) {
        let columns: Vec<(&[u8], usize)> = group
            .iter()
            .map(|&c| (maps.component(c).expect("checked"), c.bins(p)))
            .collect();
        let mut hist = vec![0u64; dim];
        for i in 0..maps.len() {
            let idx = columns
                .iter()
                .fold(0usize, |idx, (col, radix)| idx * radix + usize::from(col[i]));
            hist[idx] += 1;
        }
        counts.push(hist);
    }
    Ok(counts)
}

/// Normalized, concatenated histogram of `maps` under `scheme`.
pub fn build_histogram(maps: &PatternMaps, scheme: &SchemeExpr) -> Result<FeatureHistogram> {
    let counts = build_counts(maps, scheme)?;
    let dims = counts.iter().map(Vec::len).collect();
    let n = maps.len() as f64;
    let bins = counts.iter().flatten().map(|&c| c as f64 / n).collect();
    Ok(FeatureHistogram {
        scheme: scheme.clone(),
        neighbors: maps.neighbors,
        radius: maps.radius,
        dims,
        bins,
    })
}
