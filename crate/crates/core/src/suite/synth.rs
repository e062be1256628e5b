//! Seeded synthetic texture suites for running the full pipeline without external data.
//!
//! Class `c` uses generator `c % 3` (grating, checkerboard, smoothed noise)
//! at scale `c / 3`. Every sample gets a random quarter-turn and a random
//! intensity affine map, both of which the descriptors are invariant to.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cache::write_atomic;
use super::{SuiteConfig, SuiteSpec};
use crate::error::{Error, Result};
use crate::image::{encode_pgm, GrayImage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthParams {
    pub seed: u64,
    pub classes: usize,
    /// Split as `ceil(n / 2)` training and `floor(n / 2)` test samples.
    pub samples_per_class: usize,
    pub size: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 1,
            classes: 3,
            samples_per_class: 10,
            size: 64,
        }
    }
}

fn texture(class: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let level = (class / 3) as f64;
    let n = size * size;
    let mut v = match class % 3 {
        0 => {
            let theta = 0.35 + 0.6 * level;
            let period = 4.0 + 2.5 * level;
            let phase = rng.random_range(0.0..2.0 * PI);
            let (c, s) = (theta.cos(), theta.sin());
            (0..n)
                .map(|i| {
                    let (x, y) = ((i % size) as f64, (i / size) as f64);
                    128.0 + 60.0 * (2.0 * PI * (x * c + y * s) / period + phase).sin()
                })
                .collect::<Vec<_>>()
        }
        1 => {
            let cell = 2 + 3 * (class / 3);
            let (ox, oy) = (rng.random_range(0..2 * cell), rng.random_range(0..2 * cell));
            (0..n)
                .map(|i| {
                    let (x, y) = (i % size + ox, i / size + oy);
                    if (x / cell + y / cell).is_multiple_of(2) {
                        78.0
                    } else {
                        178.0
                    }
                })
                .collect()
        }
        _ => {
            let half = 1 + class / 3;
            let noise: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..255.0)).collect();
            let mut smooth = vec![0.0; n];
            for y in 0..size {
                for x in 0..size {
                    let mut acc = 0.0;
                    for dy in -(half as isize)..=half as isize {
                        for dx in -(half as isize)..=half as isize {
                            let sx = (x as isize + dx).rem_euclid(size as isize) as usize;
                            let sy = (y as isize + dy).rem_euclid(size as isize) as usize;
                            acc += noise[sy * size + sx];
                        }
                    }
                    smooth[y * size + x] = acc / ((2 * half + 1) * (2 * half + 1)) as f64;
                }
            }
            let mean = smooth.iter().sum::<f64>() / n as f64;
            let std = (smooth.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt().max(1e-9);
            smooth.iter().map(|v| (128.0 + 35.0 * (v - mean) / std).clamp(40.0, 216.0)).collect()
        }
    };
    for x in &mut v {
        *x += rng.random_range(-4.0..4.0);
    }
    v
}

fn sample_image(params: &SynthParams, class: usize, index: usize) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream((class * params.samples_per_class + index) as u64);
    let base = GrayImage::new(params.size, params.size, texture(class, params.size, &mut rng))?;
    let mut img = base;
    for _ in 0..rng.random_range(0..4) {
        img = img.rot90();
    }
    let a = rng.random_range(0.8..1.2);
    let b = rng.random_range(-15.0..15.0);
    Ok(img.map(|v| (a * v + b).round().clamp(0.0, 255.0)))
}

/// Writes `images/*.pgm`, `train.csv`, `test.csv`, `suite.toml` and
/// `matrix.toml` under `out_dir` and returns the loaded suite.
pub fn make_synthetic_suite(params: &SynthParams, out_dir: &Path) -> Result<SuiteSpec> {
    if params.classes < 2 {
        return Err(Error::Parameter(format!("synthetic suites need at least 2 classes, got {}", params.classes)));
    }
    if params.samples_per_class < 2 {
        return Err(Error::Parameter("synthetic suites need at least 2 samples per class".into()));
    }
    if params.size < 16 {
        return Err(Error::Parameter(format!("synthetic images must be at least 16 pixels wide, got {}", params.size)));
    }
    let train_per_class = params.samples_per_class.div_ceil(2);
    let (mut train, mut test) = (String::new(), String::new());
    for class in 0..params.classes {
        for index in 0..params.samples_per_class {
            let name = format!("c{class:02}_s{index:03}.pgm");
            write_atomic(&out_dir.join("images").join(&name), &encode_pgm(&sample_image(params, class, index)?))?;
            let list = if index < train_per_class { &mut train } else { &mut test };
            let _ = writeln!(list, "{name},{class}");
        }
    }
    let n_train = params.classes * train_per_class;
    let n_test = params.classes * params.samples_per_class - n_train;
    write_atomic(&out_dir.join("train.csv"), train.as_bytes())?;
    write_atomic(&out_dir.join("test.csv"), test.as_bytes())?;
    let suite = format!(
        "name = \"synthetic\"\nroot = \"images\"\ntrain_manifest = \"train.csv\"\ntest_manifest = \"test.csv\"\n\
         format = \"native-csv\"\nexpected_train = {n_train}\nexpected_test = {n_test}\n"
    );
    write_atomic(&out_dir.join("suite.toml"), suite.as_bytes())?;
    let matrix = "schemes = [\"CLBP_S/M/C\", \"CLDP_S/M/D/C\"]\ngeometries = [[8, 2]]\nnormalize = \"none\"\nsuites = [\"suite.toml\"]\n";
    write_atomic(&out_dir.join("matrix.toml"), matrix.as_bytes())?;
    SuiteConfig::from_file(out_dir.join("suite.toml"))?.load()
}
