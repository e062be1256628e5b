//! Train/test suites, the scheme × geometry matrix, and the feature cache.

pub mod cache;
mod matrix;
mod synth;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Deserialize;

use crate::classifier::{evaluate, EvalReport, ModelSet};
use crate::error::{Error, Result};
use crate::histogram::{build_histogram, read_binary, scheme_dimension, write_binary, Component, FeatureHistogram, SchemeExpr};
use crate::image::{decode_image, Normalization};
use crate::manifest::{load_manifest, ManifestFormat, SampleManifest};
use crate::patterns::{Extractor, PatternMaps};
use cache::{content_hash, decode_maps, encode_maps, CacheKey, EntryKind, FeatureCache};

pub use matrix::{load_matrix, run_matrix, ExperimentMatrix, MatrixCell, MatrixReport, AVG2_TC12, AVG3, STANDARD_SUITES};
pub use synth::{make_synthetic_suite, SynthParams};

pub const OUTEX_HINT: &str = "Outex suites are not bundled. Download Outex_TC_00010 and Outex_TC_00012 from \
https://www.outex.oulu.fi/ (Test Suites > TC), unpack both into one directory and point OUTEX_ROOT at it.";

/// A train/test split with its expected sizes.
#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub name: String,
    pub train: SampleManifest,
    pub test: SampleManifest,
    pub expected_counts: Option<(usize, usize)>,
}

impl SuiteSpec {
    pub fn new(name: impl Into<String>, train: SampleManifest, test: SampleManifest, expected_counts: Option<(usize, usize)>) -> Result<Self> {
        let name = name.into();
        let (train_labels, test_labels) = (train.labels(), test.labels());
        if train_labels != test_labels {
            let a: BTreeSet<_> = train_labels.into_iter().collect();
            let b: BTreeSet<_> = test_labels.into_iter().collect();
            let only_train: Vec<_> = a.difference(&b).collect();
            let only_test: Vec<_> = b.difference(&a).collect();
            return Err(Error::Parameter(format!(
                "suite {name}: label sets differ (train only {only_train:?}, test only {only_test:?})"
            )));
        }
        if let Some((tr, te)) = expected_counts {
            if (train.len(), test.len()) != (tr, te) {
                return Err(Error::Parameter(format!(
                    "suite {name}: expected {tr} train / {te} test samples, found {} / {}",
                    train.len(),
                    test.len()
                )));
            }
        }
        Ok(Self {
            name,
            train,
            test,
            expected_counts,
        })
    }
}

/// Suite description as written in a TOML file. Paths are relative to the file
/// and may start with `$VAR/` to read a directory from the environment.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    pub root: PathBuf,
    pub train_manifest: PathBuf,
    pub test_manifest: PathBuf,
    #[serde(default)]
    pub format: ManifestFormat,
    pub expected_train: Option<usize>,
    pub expected_test: Option<usize>,
}

impl SuiteConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: SuiteConfig = toml::from_str(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    /// Makes relative paths relative to `base`; `$VAR` prefixes are kept for [`load`](Self::load).
    pub(crate) fn rebase(&mut self, base: &Path) {
        for p in [&mut self.root, &mut self.train_manifest, &mut self.test_manifest] {
            if p.is_relative() && !p.to_string_lossy().starts_with('$') {
                *p = base.join(&*p);
            }
        }
    }

    /// Reads both manifests and validates the split.
    pub fn load(&self) -> Result<SuiteSpec> {
        let root = expand_env(&self.root)?;
        if !root.is_dir() {
            return Err(Error::Parameter(format!(
                "suite {}: data root {} does not exist. {OUTEX_HINT}",
                self.name,
                root.display()
            )));
        }
        let train = load_manifest(expand_env(&self.train_manifest)?, &root, self.format)?;
        let test = load_manifest(expand_env(&self.test_manifest)?, &root, self.format)?;
        let expected = match (self.expected_train, self.expected_test) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => {
                return Err(Error::Parameter(format!(
                    "suite {}: expected_train and expected_test must be given together",
                    self.name
                )))
            }
        };
        SuiteSpec::new(self.name.clone(), train, test, expected)
    }
}

fn expand_env(path: &Path) -> Result<PathBuf> {
    let text = path.to_string_lossy();
    let Some(rest) = text.strip_prefix('$') else {
        return Ok(path.to_path_buf());
    };
    let (var, tail) = rest.split_once('/').unwrap_or((rest, ""));
    let var = var.trim_start_matches('{').trim_end_matches('}');
    match std::env::var_os(var) {
        Some(dir) => Ok(PathBuf::from(dir).join(tail)),
        None => Err(Error::Parameter(format!(
            "{} refers to ${var}, which is not set. {OUTEX_HINT}",
            path.display()
        ))),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub cache_dir: Option<PathBuf>,
    pub normalization: Normalization,
}

/// Counters describing where features came from during a run.
#[derive(Debug, Default)]
pub struct RunStats {
    pub decoded: AtomicUsize,
    pub map_hits: AtomicUsize,
    pub hist_hits: AtomicUsize,
}

impl RunStats {
    pub fn decoded(&self) -> usize {
        self.decoded.load(Ordering::Relaxed)
    }

    pub fn map_hits(&self) -> usize {
        self.map_hits.load(Ordering::Relaxed)
    }

    pub fn hist_hits(&self) -> usize {
        self.hist_hits.load(Ordering::Relaxed)
    }
}

/// Image → histogram for one scheme and geometry, going through the cache when one is set.
pub struct FeaturePipeline {
    extractor: Extractor,
    scheme: SchemeExpr,
    normalization: Normalization,
    cache: Option<FeatureCache>,
    stats: RunStats,
}

impl FeaturePipeline {
    pub fn new(scheme: &SchemeExpr, neighbors: usize, radius: f64, options: &RunOptions) -> Result<Self> {
        // Maps always include D when the geometry allows it, so cached maps are shared by all schemes.
        if scheme.uses(Component::D) && radius < 2.0 {
            return Err(Error::Parameter(format!(
                "scheme {scheme} uses D, which needs R >= 2 (got R={radius})"
            )));
        }
        Ok(Self {
            extractor: Extractor::new(neighbors, radius, radius >= 2.0)?,
            scheme: scheme.clone(),
            normalization: options.normalization,
            cache: options.cache_dir.as_ref().map(FeatureCache::new),
            stats: RunStats::default(),
        })
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    fn keys(&self, content: &str) -> (CacheKey, CacheKey) {
        let p = self.extractor.neighbors().to_string();
        let r = crate::histogram::export::format_radius(self.extractor.radius());
        let norm = self.normalization.as_str();
        let maps = CacheKey::new(&["maps", content, &p, &r, norm]);
        let hist = CacheKey::new(&["hist", content, &p, &r, norm, &self.scheme.canonical()]);
        (maps, hist)
    }

    fn maps_from_bytes(&self, path: &Path, bytes: &[u8]) -> Result<PatternMaps> {
        self.stats.decoded.fetch_add(1, Ordering::Relaxed);
        let img = self.normalization.apply(&decode_image(path, bytes)?);
        self.extractor.extract(&img)
    }

    /// Extracts the histogram of one image file.
    pub fn histogram(&self, path: &Path) -> Result<FeatureHistogram> {
        let sample = path.display().to_string();
        self.histogram_inner(path).map_err(|e| match e {
            e @ Error::Cache { .. } => e,
            e => e.in_sample(sample),
        })
    }

    fn histogram_inner(&self, path: &Path) -> Result<FeatureHistogram> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let Some(cache) = &self.cache else {
            return build_histogram(&self.maps_from_bytes(path, &bytes)?, &self.scheme);
        };
        let sample = path.display().to_string();
        let (maps_key, hist_key) = self.keys(&content_hash(&bytes));
        let storable = self.extractor.radius().fract() == 0.0;

        if storable {
            if let Some(payload) = cache.get(&hist_key, EntryKind::Hist, &sample)? {
                let hist = self.decode_hist(&payload).map_err(|e| Error::Cache {
                    sample: sample.clone(),
                    message: e.to_string(),
                })?;
                self.stats.hist_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(hist);
            }
        }
        let maps = match cache.get(&maps_key, EntryKind::Maps, &sample)? {
            Some(payload) => {
                self.stats.map_hits.fetch_add(1, Ordering::Relaxed);
                decode_maps(&payload).map_err(|e| Error::Cache {
                    sample: sample.clone(),
                    message: e.to_string(),
                })?
            }
            None => {
                let maps = self.maps_from_bytes(path, &bytes)?;
                cache.put(&maps_key, EntryKind::Maps, &encode_maps(&maps))?;
                maps
            }
        };
        let hist = build_histogram(&maps, &self.scheme)?;
        if storable {
            let mut payload = Vec::new();
            write_binary(&mut payload, &hist)?;
            cache.put(&hist_key, EntryKind::Hist, &payload)?;
        }
        Ok(hist)
    }

    fn decode_hist(&self, payload: &[u8]) -> Result<FeatureHistogram> {
        let (record, used) = read_binary(payload)?;
        let p = self.extractor.neighbors();
        let expected: Vec<usize> = self
            .scheme
            .groups()
            .iter()
            .map(|g| g.iter().map(|c| c.bins(p)).product())
            .collect();
        if used != payload.len()
            || record.neighbors != p
            || f64::from(record.radius) != self.extractor.radius()
            || record.dims != expected
            || record.bins.len() != scheme_dimension(&self.scheme, p)
        {
            return Err(Error::format(0, "histogram record does not match the requested configuration"));
        }
        Ok(FeatureHistogram {
            scheme: self.scheme.clone(),
            neighbors: p,
            radius: self.extractor.radius(),
            dims: record.dims,
            bins: record.bins,
        })
    }

    /// Histograms of every manifest entry, in manifest order.
    pub fn manifest_histograms(&self, manifest: &SampleManifest) -> Result<Vec<(FeatureHistogram, usize)>> {
        manifest
            .entries
            .par_iter()
            .map(|e| Ok((self.histogram(&manifest.resolve(e))?, e.label)))
            .collect()
    }
}

/// Builds models from the training split and classifies the test split.
pub fn run_suite(spec: &SuiteSpec, scheme: &SchemeExpr, neighbors: usize, radius: f64, options: &RunOptions) -> Result<EvalReport> {
    let pipeline = FeaturePipeline::new(scheme, neighbors, radius, options)?;
    run_suite_with(spec, &pipeline)
}

pub fn run_suite_with(spec: &SuiteSpec, pipeline: &FeaturePipeline) -> Result<EvalReport> {
    let models = ModelSet::new(pipeline.manifest_histograms(&spec.train)?)?;
    let tests = pipeline.manifest_histograms(&spec.test)?;
    evaluate(&spec.name, &tests, &models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::parse_scheme;

    fn synthetic(dir: &Path) -> SuiteSpec {
        let params = SynthParams {
            seed: 7,
            classes: 3,
            samples_per_class: 4,
            size: 32,
        };
        make_synthetic_suite(&params, dir).unwrap()
    }

    #[test]
    fn self_test_is_perfect() {
        let dir = tempfile::tempdir().unwrap();
        let spec = synthetic(dir.path());
        let same = SuiteSpec::new("self", spec.train.clone(), spec.train.clone(), None).unwrap();
        let report = run_suite(&same, &parse_scheme("S/M/C").unwrap(), 8, 1.0, &RunOptions::default()).unwrap();
        assert_eq!(report.accuracy, 1.0);
    }

    #[test]
    fn cache_is_transparent_and_shared() {
        let dir = tempfile::tempdir().unwrap();
        let spec = synthetic(&dir.path().join("suite"));
        let cached = RunOptions {
            cache_dir: Some(dir.path().join("cache")),
            ..RunOptions::default()
        };
        let scheme = parse_scheme("S_D_M/C").unwrap();
        let plain = run_suite(&spec, &scheme, 8, 2.0, &RunOptions::default()).unwrap();

        let cold = FeaturePipeline::new(&scheme, 8, 2.0, &cached).unwrap();
        assert_eq!(run_suite_with(&spec, &cold).unwrap(), plain);
        assert_eq!(cold.stats().decoded(), 12);

        let warm = FeaturePipeline::new(&scheme, 8, 2.0, &cached).unwrap();
        assert_eq!(run_suite_with(&spec, &warm).unwrap(), plain);
        assert_eq!((warm.stats().decoded(), warm.stats().hist_hits()), (0, 12));

        let other = FeaturePipeline::new(&parse_scheme("CLDP_S/D").unwrap(), 8, 2.0, &cached).unwrap();
        run_suite_with(&spec, &other).unwrap();
        assert_eq!((other.stats().decoded(), other.stats().map_hits()), (0, 12));
    }

    #[test]
    fn corrupt_cache_names_sample() {
        let dir = tempfile::tempdir().unwrap();
        let spec = synthetic(&dir.path().join("suite"));
        let cache_dir = dir.path().join("cache");
        let options = RunOptions {
            cache_dir: Some(cache_dir.clone()),
            ..RunOptions::default()
        };
        let scheme = parse_scheme("S").unwrap();
        run_suite(&spec, &scheme, 8, 1.0, &options).unwrap();
        let mut entries: Vec<PathBuf> = fs::read_dir(&cache_dir)
            .unwrap()
            .flat_map(|d| fs::read_dir(d.unwrap().path()).unwrap())
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "hist"))
            .collect();
        entries.sort();
        let mut bytes = fs::read(&entries[0]).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 0x40;
        fs::write(&entries[0], bytes).unwrap();
        match run_suite(&spec, &scheme, 8, 1.0, &options) {
            Err(Error::Cache { sample, .. }) => assert!(sample.ends_with(".pgm")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_image_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let spec = synthetic(dir.path());
        let victim = spec.test.resolve(&spec.test.entries[0]);
        fs::remove_file(&victim).unwrap();
        let err = run_suite(&spec, &parse_scheme("S").unwrap(), 8, 1.0, &RunOptions::default()).unwrap_err();
        assert!(err.to_string().contains(&victim.display().to_string()), "{err}");
    }

    #[test]
    fn label_sets_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let spec = synthetic(dir.path());
        let mut test = spec.test.clone();
        test.entries.retain(|e| e.label != 0);
        assert!(SuiteSpec::new("x", spec.train.clone(), test, None).is_err());
        assert!(SuiteSpec::new("x", spec.train.clone(), spec.test.clone(), Some((6, 7))).is_err());
        assert!(SuiteSpec::new("x", spec.train, spec.test, Some((6, 6))).is_ok());
    }

    #[test]
    fn config_files_and_missing_roots() {
        let dir = tempfile::tempdir().unwrap();
        synthetic(&dir.path().join("s"));
        let config = SuiteConfig::from_file(dir.path().join("s/suite.toml")).unwrap();
        let spec = config.load().unwrap();
        assert_eq!((spec.train.len(), spec.test.len()), (6, 6));

        let path = dir.path().join("outex.toml");
        fs::write(
            &path,
            "name = \"TC10\"\nroot = \"$CLDP_TEST_UNSET_ROOT/Outex_TC_00010/images\"\n\
             train_manifest = \"$CLDP_TEST_UNSET_ROOT/Outex_TC_00010/000/train.txt\"\n\
             test_manifest = \"$CLDP_TEST_UNSET_ROOT/Outex_TC_00010/000/test.txt\"\nformat = \"outex-index\"\n",
        )
        .unwrap();
        let err = SuiteConfig::from_file(&path).unwrap().load().unwrap_err().to_string();
        assert!(err.contains("outex.oulu.fi"), "{err}");

        fs::write(&path, "name = \"x\"\nroot = \"nowhere\"\ntrain_manifest = \"a\"\ntest_manifest = \"b\"\n").unwrap();
        let err = SuiteConfig::from_file(&path).unwrap().load().unwrap_err().to_string();
        assert!(err.contains("does not exist") && err.contains("outex.oulu.fi"), "{err}");

        fs::write(&path, "name = \"x\"\nroots = \"nowhere\"\n").unwrap();
        assert!(matches!(SuiteConfig::from_file(&path), Err(Error::Config { .. })));
    }
}
