//! Labelled image lists for training and testing.
//!
//! Two formats are accepted:
//!
//! * native CSV: one `relative/path.pgm,<label>` per line, no header;
//! * Outex index: an optional leading count line, then whitespace separated
//!   `filename label` lines.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ManifestFormat {
    #[default]
    NativeCsv,
    OutexIndex,
}

impl FromStr for ManifestFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "native-csv" => Ok(Self::NativeCsv),
            "outex-index" => Ok(Self::OutexIndex),
            other => Err(Error::Parameter(format!(
                "unknown manifest format {other:?} (expected native-csv or outex-index)"
            ))),
        }
    }
}

impl fmt::Display for ManifestFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NativeCsv => "native-csv",
            Self::OutexIndex => "outex-index",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path as written in the manifest, relative to `root`.
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleManifest {
    pub root: PathBuf,
    pub source: ManifestFormat,
    pub entries: Vec<ManifestEntry>,
}

impl SampleManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Sorted, de-duplicated label set.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels: Vec<usize> = self.entries.iter().map(|e| e.label).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }
}

/// Reads a manifest and checks that every entry resolves under `root`.
pub fn load_manifest(path: impl AsRef<Path>, root: impl AsRef<Path>, format: ManifestFormat) -> Result<SampleManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path, root.as_ref(), format, true)
}

/// Parses manifest text. `path` is only used in diagnostics.
pub fn parse_manifest(text: &str, path: &Path, root: &Path, format: ManifestFormat, check_files: bool) -> Result<SampleManifest> {
    let err = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    let mut declared: Option<usize> = None;
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (file, label) = match format {
            ManifestFormat::NativeCsv => {
                let Some((file, label)) = line.rsplit_once(',') else {
                    return Err(err(line_no, format!("expected \"path,label\", got {line:?}")));
                };
                (file.trim(), label.trim())
            }
            ManifestFormat::OutexIndex => {
                let mut fields = line.split_whitespace();
                let first = fields.next().unwrap_or_default();
                match (fields.next(), fields.next()) {
                    (None, _) if entries.is_empty() && declared.is_none() => {
                        let count = first
                            .parse()
                            .map_err(|_| err(line_no, format!("unparsable count line {first:?}")))?;
                        declared = Some(count);
                        continue;
                    }
                    (Some(label), None) => (first, label),
                    _ => return Err(err(line_no, format!("expected \"filename label\", got {line:?}"))),
                }
            }
        };
        let label: usize = label
            .parse()
            .map_err(|_| err(line_no, format!("unparsable label {label:?}")))?;
        if file.is_empty() {
            return Err(err(line_no, "empty path".into()));
        }
        if !seen.insert(file.to_string()) {
            return Err(err(line_no, format!("duplicate path {file:?}")));
        }
        if check_files && !root.join(file).is_file() {
            return Err(err(
                line_no,
                format!("{file} does not resolve to a file under {}", root.display()),
            ));
        }
        entries.push(ManifestEntry {
            path: PathBuf::from(file),
            label,
        });
    }

    if let Some(count) = declared {
        if count != entries.len() {
            return Err(err(
                last_line + 1,
                format!("count line declares {count} entries, found {} (at EOF)", entries.len()),
            ));
        }
    }
    if entries.is_empty() {
        return Err(err(last_line + 1, "manifest has no entries".into()));
    }
    Ok(SampleManifest {
        root: root.to_path_buf(),
        source: format,
        entries,
    })
}
