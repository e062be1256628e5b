//! `cldp`: texture descriptor extraction, classification and benchmark sweeps.
//!
//! Exit codes: 0 success, 1 input or usage error, 2 experiment failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cldp_core::histogram::{write_binary, write_csv_line};
use cldp_core::image::decode_image;
use cldp_core::manifest::ManifestFormat;
use cldp_core::patterns::code_space_stats;
use cldp_core::suite::cache::write_atomic;
use cldp_core::suite::{run_suite_with, FeaturePipeline};
use cldp_core::{
    load_manifest, load_matrix, make_synthetic_suite, parse_scheme, run_matrix, Extractor, Normalization, RunOptions,
    SampleManifest, SchemeExpr, SuiteConfig, SuiteSpec, SynthParams,
};

#[derive(Debug, Parser)]
#[command(name = "cldp", version, about = "CLBP/CLDP texture descriptors and chi-square nearest-neighbor evaluation")]
struct Cli {
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Directory for cached pattern maps and histograms.
    #[arg(long, global = true, env = "CLDP_CACHE_DIR")]
    cache_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Histogram of one image, or of every entry of a manifest.
    Extract(ExtractArgs),
    /// Nearest-neighbor evaluation of one train/test split.
    Classify(ClassifyArgs),
    /// Run a scheme × geometry × suite matrix.
    Bench(BenchArgs),
    /// Code-space statistics of the riu2 mapping.
    EnumerateCodes(EnumerateArgs),
    /// Generate a seeded synthetic suite.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct Descriptor {
    /// Neighbors per circle.
    #[arg(short = 'P', long = "neighbors", default_value_t = 8)]
    neighbors: usize,
    /// Outer radius.
    #[arg(short = 'R', long = "radius", default_value_t = 3.0)]
    radius: f64,
    /// Fusion scheme, e.g. S/M/D/C, CLBP_S_M/C.
    #[arg(long, default_value = "S/M/D/C", value_parser = parse_scheme_arg)]
    scheme: SchemeExpr,
    /// Gray-level normalization applied after loading: none | mean128-std20.
    #[arg(long, default_value = "none")]
    normalize: Normalization,
}

impl Descriptor {
    fn options(&self, cache_dir: Option<&Path>) -> RunOptions {
        RunOptions {
            cache_dir: cache_dir.map(Path::to_path_buf),
            normalization: self.normalize,
        }
    }
}

fn parse_scheme_arg(s: &str) -> std::result::Result<SchemeExpr, String> {
    parse_scheme(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExtractFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// A .pgm, .bmp or .ras image, or a manifest listing images.
    input: PathBuf,
    #[command(flatten)]
    descriptor: Descriptor,
    /// Directory manifest paths are relative to; defaults to the manifest's directory.
    #[arg(long)]
    root: Option<PathBuf>,
    #[arg(long, default_value = "native-csv")]
    manifest_format: ManifestFormat,
    #[arg(long, value_enum, default_value = "csv")]
    format: ExtractFormat,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Also write each component map as a PGM into this directory.
    #[arg(long)]
    dump_maps: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Suite file (name, root, train_manifest, test_manifest, format).
    #[arg(long, conflicts_with_all = ["train", "test", "root"], required_unless_present = "train")]
    suite: Option<PathBuf>,
    #[arg(long, requires_all = ["test", "root"])]
    train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    test: Option<PathBuf>,
    #[arg(long, requires = "train")]
    root: Option<PathBuf>,
    #[arg(long, default_value = "native-csv")]
    manifest_format: ManifestFormat,
    #[command(flatten)]
    descriptor: Descriptor,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Matrix file: schemes, geometries, normalize, suites.
    matrix: PathBuf,
    /// Writes report.csv, report.txt and report.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Format printed to standard output.
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct EnumerateArgs {
    #[arg(short = 'P', long = "neighbors", default_value_t = 8)]
    neighbors: usize,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct SynthArgs {
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: 1, error: e.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start {} worker threads: {e}", cli.threads);
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}

/// The error chain, skipping causes whose text the previous message already includes.
fn describe(error: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in error.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    let cache = cli.cache_dir.as_deref();
    match &cli.command {
        Command::Extract(a) => extract(a, cache)?,
        Command::Classify(a) => classify(a, cache)?,
        Command::Bench(a) => return bench(a, cache),
        Command::EnumerateCodes(a) => enumerate(a)?,
        Command::Synth(a) => synth(a)?,
    }
    Ok(())
}

/// Writes atomically to `out`, or to standard output.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| ["pgm", "bmp", "ras"].iter().any(|x| e.eq_ignore_ascii_case(x)))
}

fn extract(a: &ExtractArgs, cache: Option<&Path>) -> Result<()> {
    let d = &a.descriptor;
    let pipeline = FeaturePipeline::new(&d.scheme, d.neighbors, d.radius, &d.options(cache))?;
    let items: Vec<(String, PathBuf, Option<usize>)> = if is_image(&a.input) {
        vec![(a.input.display().to_string(), a.input.clone(), None)]
    } else {
        let root = match &a.root {
            Some(r) => r.clone(),
            None => a.input.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        let manifest = load_manifest(&a.input, &root, a.manifest_format)?;
        manifest
            .entries
            .iter()
            .map(|e| (e.path.display().to_string(), manifest.resolve(e), Some(e.label)))
            .collect()
    };

    use rayon::prelude::*;
    let hists = items
        .par_iter()
        .map(|(_, path, _)| pipeline.histogram(path))
        .collect::<cldp_core::Result<Vec<_>>>()?;

    let mut bytes = Vec::new();
    for ((name, _, label), hist) in items.iter().zip(&hists) {
        match a.format {
            ExtractFormat::Csv => write_csv_line(&mut bytes, name, *label, hist)?,
            ExtractFormat::Bin => write_binary(&mut bytes, hist)?,
        }
    }
    if let Some(dir) = &a.dump_maps {
        let extractor = Extractor::new(d.neighbors, d.radius, d.radius >= 2.0)?;
        for (name, path, _) in &items {
            let raw = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            let img = d.normalize.apply(&decode_image(path, &raw)?);
            let stem = Path::new(name).with_extension("").display().to_string().replace(['/', '\\'], "_");
            for (component, map) in extractor.extract(&img)?.debug_images() {
                let target = dir.join(format!("{stem}_{component}.pgm"));
                cldp_core::save_pgm(&map, &target)?;
            }
        }
    }
    emit(a.out.as_deref(), &bytes)
}

fn load_split(a: &ClassifyArgs) -> Result<SuiteSpec> {
    if let Some(path) = &a.suite {
        return Ok(SuiteConfig::from_file(path)?.load()?);
    }
    let (Some(train), Some(test), Some(root)) = (&a.train, &a.test, &a.root) else {
        bail!("either --suite or all of --train, --test and --root are required");
    };
    let load = |p: &Path| -> Result<SampleManifest> { Ok(load_manifest(p, root, a.manifest_format)?) };
    Ok(SuiteSpec::new("custom", load(train)?, load(test)?, None)?)
}

fn classify(a: &ClassifyArgs, cache: Option<&Path>) -> Result<()> {
    let d = &a.descriptor;
    let pipeline = FeaturePipeline::new(&d.scheme, d.neighbors, d.radius, &d.options(cache))?;
    let spec = load_split(a)?;
    let report = run_suite_with(&spec, &pipeline)?;
    let text = match a.format {
        ReportFormat::Json => report.to_json() + "\n",
        ReportFormat::Table => report.to_table(),
        ReportFormat::Csv => format!(
            "suite,scheme,P,R,accuracy,ties,correct,total\n{},{},{},{},{},{},{},{}\n",
            report.suite,
            report.scheme,
            report.neighbors,
            cldp_core::histogram::export::format_radius(report.radius),
            report.accuracy,
            report.ties,
            report.correct(),
            report.total()
        ),
    };
    emit(a.out.as_deref(), text.as_bytes())
}

fn bench(a: &BenchArgs, cache: Option<&Path>) -> std::result::Result<(), Failure> {
    let matrix = load_matrix(&a.matrix)?;
    let report = run_matrix(&matrix, cache);
    let (csv, table, json) = (report.to_csv(), report.to_table(), report.to_json() + "\n");
    if let Some(dir) = &a.out_dir {
        emit(Some(&dir.join("report.csv")), csv.as_bytes())?;
        emit(Some(&dir.join("report.txt")), table.as_bytes())?;
        emit(Some(&dir.join("report.json")), json.as_bytes())?;
    }
    let shown = match a.format {
        ReportFormat::Csv => &csv,
        ReportFormat::Json => &json,
        ReportFormat::Table => &table,
    };
    emit(None, shown.as_bytes())?;
    if report.failed() {
        return Err(Failure {
            code: 2,
            error: anyhow::anyhow!("one or more suites failed; see the FAILED entries above"),
        });
    }
    Ok(())
}

fn enumerate(a: &EnumerateArgs) -> Result<()> {
    let s = code_space_stats(a.neighbors)?;
    let pops = |sep: &str| s.populations.iter().map(u64::to_string).collect::<Vec<_>>().join(sep);
    let text = match a.format {
        ReportFormat::Table => format!(
            "P                 {}\ntotal codes       {}\nrotation classes  {}\nriu2 bins         {}\nuniform codes     {}\nnon-uniform codes {}\nbin populations   {}\n",
            s.width,
            s.total,
            s.rotation_classes,
            s.riu2_bins,
            s.uniform,
            s.non_uniform,
            pops(" ")
        ),
        ReportFormat::Csv => format!(
            "P,total,rotation_classes,riu2_bins,uniform,non_uniform,populations\n{},{},{},{},{},{},{}\n",
            s.width,
            s.total,
            s.rotation_classes,
            s.riu2_bins,
            s.uniform,
            s.non_uniform,
            pops(";")
        ),
        ReportFormat::Json => format!(
            "{{\n  \"P\": {},\n  \"total\": {},\n  \"rotation_classes\": {},\n  \"riu2_bins\": {},\n  \"uniform\": {},\n  \"non_uniform\": {},\n  \"populations\": [{}]\n}}\n",
            s.width,
            s.total,
            s.rotation_classes,
            s.riu2_bins,
            s.uniform,
            s.non_uniform,
            pops(", ")
        ),
    };
    emit(None, text.as_bytes())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let params = SynthParams {
        seed: a.seed,
        classes: a.classes,
        samples_per_class: a.samples,
        size: a.size,
    };
    let spec = make_synthetic_suite(&params, &a.out_dir)?;
    eprintln!(
        "wrote {} training and {} test images to {}",
        spec.train.len(),
        spec.test.len(),
        a.out_dir.display()
    );
    Ok(())
}
