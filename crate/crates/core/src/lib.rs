//! Completed local derivative pattern (CLDP) texture descriptors.
//!
//! The crate covers the whole classification pipeline:
//!
//! * [`image`]: grayscale rasters (PGM/BMP I/O) and intensity statistics,
//! * [`sampler`]: circular neighborhood sampling with bilinear interpolation,
//! * [`patterns`]: the sign, magnitude, directional derivative and center
//!   encoders together with the rotation-invariant uniform (riu2) mapping,
//! * [`histogram`]: concatenated / joint / hybrid histogram fusion,
//! * [`classifier`]: chi-square nearest-neighbor classification,
//! * [`suite`]: train/test suites, experiment matrices and the feature cache.
//!
//! CLBP is the same pipeline without the derivative component, so both
//! descriptor families share every code path here.

pub mod classifier;
pub mod error;
pub mod exact;
pub mod histogram;
pub mod image;
pub mod manifest;
pub mod patterns;
pub mod sampler;
pub mod suite;

pub use classifier::{chi_square, classify, evaluate, EvalReport, Match, ModelSet};
pub use error::{Error, Result};
pub use histogram::{build_histogram, parse_scheme, scheme_dimension, Component, FeatureHistogram, SchemeExpr};
pub use image::{image_mean, load_bmp8, load_image, load_pgm, save_pgm, GrayImage, Normalization};
pub use manifest::{load_manifest, ManifestFormat, SampleManifest};
pub use patterns::{extract_maps, Extractor, PatternCode, PatternMaps, Riu2Code, Riu2Mapper};
pub use sampler::{make_geometry, sample_at, valid_region, NeighborhoodSample, Region, SamplingGeometry};
pub use suite::{load_matrix, make_synthetic_suite, run_matrix, run_suite, ExperimentMatrix, MatrixReport, RunOptions, SuiteConfig, SuiteSpec, SynthParams};
