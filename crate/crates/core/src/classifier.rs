//! Chi-square nearest-neighbor classification and evaluation reports.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::histogram::export::format_radius;
use crate::histogram::FeatureHistogram;

/// `Σ (T_n - M_n)² / (T_n + M_n)`, with empty bins contributing 0.
pub fn chi_square(test: &FeatureHistogram, model: &FeatureHistogram) -> Result<f64> {
    if test.len() != model.len() || !test.scheme.same_layout(&model.scheme) {
        return Err(Error::Parameter(format!(
            "histograms are not comparable: {} ({} bins) vs {} ({} bins)",
            test.scheme,
            test.len(),
            model.scheme,
            model.len()
        )));
    }
    Ok(chi_square_bins(&test.bins, &model.bins))
}

#[inline]
pub(crate) fn chi_square_bins(t: &[f64], m: &[f64]) -> f64 {
    t.iter()
        .zip(m)
        .map(|(&a, &b)| {
            let s = a + b;
            if s == 0.0 {
                0.0
            } else {
                (a - b) * (a - b) / s
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    pub histogram: FeatureHistogram,
    pub label: usize,
    pub source_index: usize,
}

/// Training histograms that all share one scheme and geometry.
#[derive(Debug, Clone)]
pub struct ModelSet {
    entries: Vec<ModelEntry>,
}

impl ModelSet {
    /// Source indices follow the order of `models`.
    pub fn new(models: Vec<(FeatureHistogram, usize)>) -> Result<Self> {
        let Some((first, _)) = models.first() else {
            return Err(Error::Parameter("model set is empty".into()));
        };
        let (len, scheme, p) = (first.len(), first.scheme.clone(), first.neighbors);
        for (i, (h, _)) in models.iter().enumerate() {
            if h.len() != len || !h.scheme.same_layout(&scheme) || h.neighbors != p {
                return Err(Error::Parameter(format!(
                    "model {i} ({}, P={}, {} bins) differs from model 0 ({scheme}, P={p}, {len} bins)",
                    h.scheme,
                    h.neighbors,
                    h.len()
                )));
            }
        }
        let entries = models
            .into_iter()
            .enumerate()
            .map(|(source_index, (histogram, label))| ModelEntry {
                histogram,
                label,
                source_index,
            })
            .collect();
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ModelEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn reference(&self) -> &FeatureHistogram {
        &self.entries[0].histogram
    }
}

/// Result of classifying one histogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub label: usize,
    pub index: usize,
    pub distance: f64,
    /// Another model with a different label sits at exactly the same distance.
    pub tied: bool,
}

/// Nearest model under chi-square; ties go to the lowest source index.
pub fn classify(test: &FeatureHistogram, models: &ModelSet) -> Result<Match> {
    if models.is_empty() {
        return Err(Error::Parameter("model set is empty".into()));
    }
    chi_square(test, models.reference())?;
    let mut best: Option<Match> = None;
    for entry in &models.entries {
        let d = chi_square_bins(&test.bins, &entry.histogram.bins);
        match &mut best {
            None => {
                best = Some(Match {
                    label: entry.label,
                    index: entry.source_index,
                    distance: d,
                    tied: false,
                })
            }
            Some(b) if d < b.distance => {
                *b = Match {
                    label: entry.label,
                    index: entry.source_index,
                    distance: d,
                    tied: false,
                }
            }
            Some(b) if d == b.distance && entry.label != b.label => b.tied = true,
            _ => {}
        }
    }
    Ok(best.expect("non-empty"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub suite: String,
    pub scheme: String,
    #[serde(rename = "P")]
    pub neighbors: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub accuracy: f64,
    /// Accuracy per true class; `null` for classes with no test samples.
    pub per_class: Vec<Option<f64>>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub ties: u64,
    #[serde(skip)]
    pub predictions: Vec<Match>,
}

impl EvalReport {
    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text rendering: summary, per-class accuracy and confusion matrix.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite     {}", self.suite);
        let _ = writeln!(s, "scheme    {}", self.scheme);
        let _ = writeln!(s, "(P, R)    ({}, {})", self.neighbors, format_radius(self.radius));
        let _ = writeln!(
            s,
            "accuracy  {:.2}% ({}/{})",
            100.0 * self.accuracy,
            self.correct(),
            self.total()
        );
        let _ = writeln!(s, "ties      {}", self.ties);
        let k = self.confusion.len();
        let width = self
            .confusion
            .iter()
            .flatten()
            .map(|c| c.to_string().len())
            .max()
            .unwrap_or(1)
            .max(k.saturating_sub(1).to_string().len())
            .max(3);
        let _ = writeln!(s);
        let _ = write!(s, "{:>5} {:>8} |", "class", "acc%");
        for j in 0..k {
            let _ = write!(s, " {j:>width$}");
        }
        let _ = writeln!(s);
        for (i, row) in self.confusion.iter().enumerate() {
            let acc = match self.per_class[i] {
                Some(a) => format!("{:.2}", 100.0 * a),
                None => "-".into(),
            };
            let _ = write!(s, "{i:>5} {acc:>8} |");
            for c in row {
                let _ = write!(s, " {c:>width$}");
            }
            let _ = writeln!(s);
        }
        s
    }
}

/// Classifies every test histogram (in parallel) and aggregates the outcome.
pub fn evaluate(suite: &str, tests: &[(FeatureHistogram, usize)], models: &ModelSet) -> Result<EvalReport> {
    if tests.is_empty() {
        return Err(Error::Parameter("no test samples".into()));
    }
    let predictions = tests
        .par_iter()
        .map(|(h, _)| classify(h, models))
        .collect::<Result<Vec<_>>>()?;
    let classes = tests
        .iter()
        .map(|(_, l)| *l)
        .chain(models.entries.iter().map(|e| e.label))
        .max()
        .expect("non-empty")
        + 1;
    let mut confusion = vec![vec![0u64; classes]; classes];
    let mut ties = 0;
    for ((_, truth), m) in tests.iter().zip(&predictions) {
        confusion[*truth][m.label] += 1;
        ties += u64::from(m.tied);
    }
    let per_class = confusion
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let n: u64 = row.iter().sum();
            (n > 0).then(|| row[i] as f64 / n as f64)
        })
        .collect();
    let correct: u64 = (0..classes).map(|i| confusion[i][i]).sum();
    let reference = models.reference();
    Ok(EvalReport {
        suite: suite.to_string(),
        scheme: reference.scheme.display_name(),
        neighbors: reference.neighbors,
        radius: reference.radius,
        accuracy: correct as f64 / tests.len() as f64,
        per_class,
        confusion,
        ties,
        predictions,
    })
}
