//! Scheme × geometry × suite sweeps and their reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{run_suite_with, FeaturePipeline, RunOptions, SuiteConfig, SuiteSpec};
use crate::error::{Error, Result};
use crate::histogram::export::format_radius;
use crate::histogram::{parse_scheme, Component, Family, SchemeExpr};
use crate::image::Normalization;

pub const STANDARD_SUITES: [&str; 3] = ["TC10", "TC12-t184", "TC12-horizon"];
pub const AVG3: &str = "AVG3";
pub const AVG2_TC12: &str = "AVG2-TC12";

#[derive(Debug, Clone)]
pub struct ExperimentMatrix {
    pub schemes: Vec<SchemeExpr>,
    pub geometries: Vec<(usize, f64)>,
    pub suites: Vec<SuiteConfig>,
    pub normalization: Normalization,
}

impl ExperimentMatrix {
    pub fn new(schemes: Vec<SchemeExpr>, geometries: Vec<(usize, f64)>, suites: Vec<SuiteConfig>, normalization: Normalization) -> Result<Self> {
        if let Some(s) = schemes.iter().find(|s| s.uses(Component::D)) {
            if let Some((p, r)) = geometries.iter().find(|(_, r)| *r < 2.0) {
                return Err(Error::Parameter(format!(
                    "scheme {s} uses D, which needs R >= 2, but geometry ({p}, {r}) is listed"
                )));
            }
        }
        for (i, a) in suites.iter().enumerate() {
            if suites[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::Parameter(format!("suite {} is listed twice", a.name)));
            }
        }
        Ok(Self {
            schemes,
            geometries,
            suites,
            normalization,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixFile {
    schemes: Vec<String>,
    #[serde(default)]
    geometries: Vec<(usize, f64)>,
    #[serde(default)]
    normalize: Option<String>,
    #[serde(default)]
    suites: Vec<PathBuf>,
    #[serde(default, rename = "suite")]
    inline: Vec<SuiteConfig>,
}

/// Reads a matrix file. Suite files and inline `[[suite]]` paths are relative to it.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<ExperimentMatrix> {
    let path = path.as_ref();
    let config_err = |message: String| Error::Config {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: MatrixFile = toml::from_str(&text).map_err(|e| config_err(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let schemes = file
        .schemes
        .iter()
        .map(|s| parse_scheme(s))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| config_err(e.to_string()))?;
    let normalization = match &file.normalize {
        Some(n) => n.parse().map_err(|e: Error| config_err(e.to_string()))?,
        None => Normalization::None,
    };
    let mut suites = file
        .suites
        .iter()
        .map(|p| SuiteConfig::from_file(base.join(p)))
        .collect::<Result<Vec<_>>>()?;
    for mut s in file.inline {
        s.rebase(base);
        suites.push(s);
    }
    ExperimentMatrix::new(schemes, file.geometries, suites, normalization).map_err(|e| config_err(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixCell {
    pub scheme: String,
    #[serde(rename = "P")]
    pub neighbors: usize,
    #[serde(rename = "R")]
    pub radius: f64,
    pub suite: String,
    pub accuracy: Option<f64>,
    pub ties: Option<u64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixReport {
    pub schemes: Vec<String>,
    pub geometries: Vec<(usize, f64)>,
    pub suites: Vec<String>,
    /// Ordered by scheme, then geometry, then suite.
    pub cells: Vec<MatrixCell>,
    #[serde(skip)]
    canonical: Vec<(Family, String)>,
}

/// Runs every cell. Failures are recorded per cell rather than aborting the sweep.
pub fn run_matrix(matrix: &ExperimentMatrix, cache_dir: Option<&Path>) -> MatrixReport {
    let options = RunOptions {
        cache_dir: cache_dir.map(Path::to_path_buf),
        normalization: matrix.normalization,
    };
    let loaded: Vec<std::result::Result<SuiteSpec, String>> =
        matrix.suites.iter().map(|s| s.load().map_err(|e| e.to_string())).collect();
    let (ns, ng, nu) = (matrix.schemes.len(), matrix.geometries.len(), matrix.suites.len());
    let mut cells: Vec<Option<MatrixCell>> = vec![None; ns * ng * nu];

    for (gi, &(p, r)) in matrix.geometries.iter().enumerate() {
        for (ui, suite) in loaded.iter().enumerate() {
            for (si, scheme) in matrix.schemes.iter().enumerate() {
                let outcome = suite.clone().and_then(|spec| {
                    FeaturePipeline::new(scheme, p, r, &options)
                        .and_then(|pipeline| run_suite_with(&spec, &pipeline))
                        .map_err(|e| e.to_string())
                });
                let (accuracy, ties, error) = match outcome {
                    Ok(report) => (Some(report.accuracy), Some(report.ties), None),
                    Err(e) => (None, None, Some(e)),
                };
                cells[(si * ng + gi) * nu + ui] = Some(MatrixCell {
                    scheme: scheme.to_string(),
                    neighbors: p,
                    radius: r,
                    suite: matrix.suites[ui].name.clone(),
                    accuracy,
                    ties,
                    error,
                });
            }
        }
    }
    MatrixReport {
        schemes: matrix.schemes.iter().map(ToString::to_string).collect(),
        geometries: matrix.geometries.clone(),
        suites: matrix.suites.iter().map(|s| s.name.clone()).collect(),
        cells: cells.into_iter().map(|c| c.expect("every cell visited")).collect(),
        canonical: matrix.schemes.iter().map(|s| (s.family(), s.canonical())).collect(),
    }
}

/// Groups of `scheme` with `D` removed, in canonical form.
fn without_derivative(scheme: &SchemeExpr) -> String {
    scheme
        .groups()
        .iter()
        .map(|g| g.iter().filter(|&&c| c != Component::D).map(|c| c.symbol().to_string()).collect::<Vec<_>>().join("/"))
        .filter(|g| !g.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

impl MatrixReport {
    pub fn failed(&self) -> bool {
        self.cells.iter().any(|c| c.error.is_some())
    }

    fn cell(&self, si: usize, gi: usize, ui: usize) -> &MatrixCell {
        &self.cells[(si * self.geometries.len() + gi) * self.suites.len() + ui]
    }

    /// Mean accuracy over `members`; `None` unless every member ran successfully.
    pub fn aggregate(&self, si: usize, gi: usize, members: &[&str]) -> Option<f64> {
        let mut sum = 0.0;
        for m in members {
            let ui = self.suites.iter().position(|s| s == m)?;
            sum += self.cell(si, gi, ui).accuracy?;
        }
        Some(sum / members.len() as f64)
    }

    fn aggregates(&self) -> Vec<(&'static str, Vec<&'static str>)> {
        let has = |n: &str| self.suites.iter().any(|s| s == n);
        let mut out = Vec::new();
        if STANDARD_SUITES.iter().all(|s| has(s)) {
            out.push((AVG3, STANDARD_SUITES.to_vec()));
        }
        if has(STANDARD_SUITES[1]) && has(STANDARD_SUITES[2]) {
            out.push((AVG2_TC12, STANDARD_SUITES[1..].to_vec()));
        }
        out
    }

    /// `scheme,P,R,suite,accuracy,ties`; accuracies are fractions in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,P,R,suite,accuracy,ties\n");
        let aggregates = self.aggregates();
        for (si, scheme) in self.schemes.iter().enumerate() {
            for (gi, &(p, r)) in self.geometries.iter().enumerate() {
                let r = format_radius(r);
                for ui in 0..self.suites.len() {
                    let c = self.cell(si, gi, ui);
                    match (c.accuracy, c.ties) {
                        (Some(a), Some(t)) => {
                            let _ = writeln!(s, "{scheme},{p},{r},{},{a},{t}", c.suite);
                        }
                        _ => {
                            let _ = writeln!(s, "{scheme},{p},{r},{},FAILED,", c.suite);
                        }
                    }
                }
                for (name, members) in &aggregates {
                    let ties: Option<u64> = members
                        .iter()
                        .map(|m| {
                            let ui = self.suites.iter().position(|s| s == m)?;
                            self.cell(si, gi, ui).ties
                        })
                        .sum();
                    match (self.aggregate(si, gi, members), ties) {
                        (Some(a), Some(t)) => {
                            let _ = writeln!(s, "{scheme},{p},{r},{name},{a},{t}");
                        }
                        _ => {
                            let _ = writeln!(s, "{scheme},{p},{r},{name},FAILED,");
                        }
                    }
                }
            }
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Row order: each CLBP scheme is followed by its CLDP partner (same groups
    /// plus `D`) and a Δ row; unpaired schemes stand alone.
    fn row_order(&self) -> Vec<(usize, Option<usize>)> {
        let partner = |si: usize| {
            let (fam, canon) = &self.canonical[si];
            if *fam != Family::Clbp {
                return None;
            }
            (0..self.schemes.len()).find(|&o| {
                let (of, _) = &self.canonical[o];
                *of == Family::Cldp
                    && parse_scheme(&self.schemes[o]).is_ok_and(|s| s.uses(Component::D) && &without_derivative(&s) == canon)
            })
        };
        let mut used = vec![false; self.schemes.len()];
        let mut rows = Vec::new();
        for si in 0..self.schemes.len() {
            if used[si] {
                continue;
            }
            used[si] = true;
            match partner(si).filter(|&o| !used[o]) {
                Some(o) => {
                    used[o] = true;
                    rows.push((si, Some(o)));
                }
                None => rows.push((si, None)),
            }
        }
        rows
    }

    fn render_block(&self, out: &mut String, title: &str, value: &dyn Fn(usize, usize) -> Option<f64>) {
        let rows = self.row_order();
        let name_w = self
            .schemes
            .iter()
            .map(String::len)
            .chain([title.len(), "Δ (Accuracy)".chars().count()])
            .max()
            .unwrap_or(0);
        let _ = write!(out, "{title:<name_w$}");
        for &(p, r) in &self.geometries {
            let _ = write!(out, " {:>9}", format!("({p},{})", format_radius(r)));
        }
        let _ = writeln!(out);
        let fmt = |v: Option<f64>| v.map_or_else(|| "FAILED".to_string(), |a| format!("{:.2}", 100.0 * a));
        for (si, partner) in rows {
            let _ = write!(out, "{:<name_w$}", self.schemes[si]);
            for gi in 0..self.geometries.len() {
                let _ = write!(out, " {:>9}", fmt(value(si, gi)));
            }
            let _ = writeln!(out);
            if let Some(o) = partner {
                let _ = write!(out, "{:<name_w$}", self.schemes[o]);
                for gi in 0..self.geometries.len() {
                    let _ = write!(out, " {:>9}", fmt(value(o, gi)));
                }
                let _ = writeln!(out);
                let label = "Δ (Accuracy)";
                let pad = name_w - label.chars().count();
                let _ = write!(out, "{label}{}", " ".repeat(pad));
                for gi in 0..self.geometries.len() {
                    let delta = match (value(si, gi), value(o, gi)) {
                        (Some(a), Some(b)) => format!("{:+.2}", 100.0 * (b - a)),
                        _ => "-".into(),
                    };
                    let _ = write!(out, " {delta:>9}");
                }
                let _ = writeln!(out);
            }
        }
    }

    /// Accuracy (%) tables: one per aggregate, then one per suite, then failures.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if self.geometries.is_empty() || self.schemes.is_empty() || self.suites.is_empty() {
            out.push_str("(empty matrix)\n");
            return out;
        }
        for (name, members) in self.aggregates() {
            self.render_block(&mut out, &format!("{name} accuracy (%)"), &|si, gi| self.aggregate(si, gi, &members));
            out.push('\n');
        }
        for (ui, suite) in self.suites.iter().enumerate() {
            self.render_block(&mut out, &format!("{suite} accuracy (%)"), &|si, gi| self.cell(si, gi, ui).accuracy);
            out.push('\n');
        }
        let mut failures: Vec<String> = self
            .cells
            .iter()
            .filter_map(|c| c.error.as_ref().map(|e| format!("FAILED {}: {e}", c.suite)))
            .collect();
        failures.dedup();
        for f in failures {
            let _ = writeln!(out, "{f}");
        }
        out
    }
}
