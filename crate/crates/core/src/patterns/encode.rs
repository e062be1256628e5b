use super::PatternCode;
use crate::error::{Error, Result};
use crate::sampler::NeighborhoodSample;

#[inline]
pub(crate) fn threshold_bits(values: impl Iterator<Item = f64>, threshold: f64) -> u32 {
    values
        .enumerate()
        .fold(0, |bits, (p, v)| bits | (u32::from(v >= threshold) << p))
}

/// Sign component: bit `p` is set iff `d_p >= 0`.
pub fn encode_sign(sample: &NeighborhoodSample) -> PatternCode {
    PatternCode::new(threshold_bits(sample.diffs.iter().copied(), 0.0), sample.len())
}

/// Magnitude component: bit `p` is set iff `|d_p| >= c_m`.
pub fn encode_magnitude(sample: &NeighborhoodSample, mean_magnitude: f64) -> PatternCode {
    PatternCode::new(
        threshold_bits(sample.diffs.iter().map(|d| d.abs()), mean_magnitude),
        sample.len(),
    )
}

/// Directional derivative component: XOR of the sign bits of two concentric
/// samples taken in the same directions around the same center.
pub fn encode_derivative(outer: &NeighborhoodSample, inner: &NeighborhoodSample) -> Result<PatternCode> {
    if outer.len() != inner.len() {
        return Err(Error::Parameter(format!(
            "derivative needs equal neighbor counts, got {} and {}",
            outer.len(),
            inner.len()
        )));
    }
    if outer.center != inner.center {
        return Err(Error::Parameter("derivative samples have different centers".into()));
    }
    Ok(encode_sign(outer).xor(encode_sign(inner)))
}

/// Center component: `g_c >= c_I`.
pub fn encode_center(center: f64, mean_intensity: f64) -> bool {
    center >= mean_intensity
}
