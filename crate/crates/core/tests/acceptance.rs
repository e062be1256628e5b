//! Acceptance criteria, one PASS/FAIL/SKIP line each.
//!
//! Criteria 10-12 need a local Outex copy: set `OUTEX_ROOT` to the directory
//! holding `Outex_TC_00010` and `Outex_TC_00012`.

#[path = "support/oracle.rs"]
mod oracle;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cldp_core::histogram::build_counts;
use cldp_core::patterns::{code_space_stats, MapperStrategy};
use cldp_core::suite::{run_suite_with, FeaturePipeline, SuiteConfig};
use cldp_core::{
    build_histogram, chi_square, classify, extract_maps, load_matrix, make_synthetic_suite, parse_scheme, run_matrix,
    scheme_dimension, Component, ExperimentMatrix, FeatureHistogram, GrayImage, ModelSet, Normalization, Riu2Mapper,
    RunOptions, SchemeExpr, SynthParams,
};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_image(w: usize, h: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::new(w, h, (0..w * h).map(|_| f64::from(rng.random::<u8>())).collect()).unwrap()
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn c1_riu2_combinatorics() -> Check {
    let s = code_space_stats(8).map_err(|e| e.to_string())?;
    let mut classes = HashSet::new();
    for code in 0u32..256 {
        let canonical = (0..8).map(|k| ((code << k) | (code >> (8 - k))) & 0xff).min().unwrap();
        classes.insert(canonical);
    }
    let got = (s.total, s.rotation_classes, classes.len() as u64, s.riu2_bins, s.uniform);
    ensure(got == (256, 36, 36, 10, 58), || format!("(total, classes, brute-force classes, bins, uniform) = {got:?}"))?;
    Ok("256 codes, 36 rotation classes, 10 riu2 bins, 58 uniform".into())
}

fn c2_mapper_equivalence() -> Check {
    let lut = Riu2Mapper::with_strategy(16, MapperStrategy::LookupTable).map_err(|e| e.to_string())?;
    let direct = Riu2Mapper::with_strategy(16, MapperStrategy::Direct).map_err(|e| e.to_string())?;
    if let Some(bits) = (0u32..1 << 16).find(|&b| lut.bin(b) != direct.bin(b)) {
        return Err(format!("P=16 code {bits:#x} differs"));
    }
    let lut = Riu2Mapper::with_strategy(24, MapperStrategy::LookupTable).map_err(|e| e.to_string())?;
    let direct = Riu2Mapper::with_strategy(24, MapperStrategy::Direct).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..1_000_000 {
        let bits = rng.random::<u32>() & 0xff_ffff;
        ensure(lut.bin(bits) == direct.bin(bits), || format!("P=24 code {bits:#x} differs"))?;
    }
    Ok("2^16 codes at P=16 and 10^6 random codes at P=24 agree".into())
}

const GEOMETRIES: [(usize, f64); 6] = [(8, 2.0), (8, 3.0), (16, 2.0), (16, 3.0), (24, 2.0), (24, 3.0)];

/// One group per map; `C` rides with `D` because a lone `C` group is not a scheme.
fn all_maps_scheme() -> SchemeExpr {
    parse_scheme("S_M_D/C").unwrap()
}

fn c3_rotation_invariance() -> Check {
    let scheme = all_maps_scheme();
    for seed in 0..20 {
        let img = random_image(64, 64, 1000 + seed);
        let turned = img.rot90();
        for (p, r) in GEOMETRIES {
            let mapper = Riu2Mapper::new(p).unwrap();
            let a = extract_maps(&img, p, r, &mapper).map_err(|e| e.to_string())?;
            let b = extract_maps(&turned, p, r, &mapper).map_err(|e| e.to_string())?;
            let (ha, hb) = (build_counts(&a, &scheme).unwrap(), build_counts(&b, &scheme).unwrap());
            ensure(ha == hb, || format!("image {seed}, (P,R)=({p},{r}): histograms differ after rot90"))?;
        }
    }
    Ok("20 images x 6 geometries, S/M/D/C histograms identical under rot90".into())
}

fn c4_affine_invariance() -> Check {
    for seed in 0..20 {
        let img = random_image(64, 64, 1000 + seed);
        for (p, r) in GEOMETRIES {
            let mapper = Riu2Mapper::new(p).unwrap();
            let base = extract_maps(&img, p, r, &mapper).map_err(|e| e.to_string())?;
            for a in [0.5, 3.0] {
                for b in [-10.0, 40.0] {
                    let t = extract_maps(&img.map(|v| a * v + b), p, r, &mapper).map_err(|e| e.to_string())?;
                    let same = t.sign == base.sign
                        && t.magnitude == base.magnitude
                        && t.derivative == base.derivative
                        && t.center == base.center;
                    ensure(same, || format!("image {seed}, (P,R)=({p},{r}), a={a}, b={b}: maps differ"))?;
                }
            }
        }
    }
    Ok("20 images x 6 geometries x 4 affine maps, all four maps identical".into())
}

fn random_scheme(rng: &mut ChaCha8Rng) -> String {
    loop {
        let mut comps = Component::ALL.to_vec();
        for i in (1..comps.len()).rev() {
            comps.swap(i, rng.random_range(0..=i));
        }
        comps.truncate(rng.random_range(1..=4));
        let mut groups: Vec<Vec<String>> = vec![vec![comps[0].to_string()]];
        for c in &comps[1..] {
            if rng.random_bool(0.5) {
                groups.last_mut().unwrap().push(c.to_string());
            } else {
                groups.push(vec![c.to_string()]);
            }
        }
        if groups.iter().any(|g| g == &["C"]) {
            continue;
        }
        return groups.iter().map(|g| g.join("/")).collect::<Vec<_>>().join("_");
    }
}

/// Dimension by enumerating every joint value tuple and collecting the cells it lands in.
fn brute_force_dimension(scheme: &SchemeExpr, p: usize) -> usize {
    let mut total = 0;
    for group in scheme.groups() {
        let radices: Vec<usize> = group.iter().map(|c| if *c == Component::C { 2 } else { p + 2 }).collect();
        let mut cells = HashSet::new();
        let mut values = vec![0usize; radices.len()];
        'outer: loop {
            cells.insert(cldp_core::histogram::bin_index(group, &values, p));
            for k in (0..values.len()).rev() {
                values[k] += 1;
                if values[k] < radices[k] {
                    continue 'outer;
                }
                values[k] = 0;
            }
            break;
        }
        let dense = cells.len() == radices.iter().product::<usize>() && cells.iter().all(|&c| c < cells.len());
        assert!(dense, "joint index of {group:?} is not a bijection");
        total += cells.len();
    }
    total
}

fn c5_dimension_rule() -> Check {
    let d = |s: &str, p| scheme_dimension(&parse_scheme(s).unwrap(), p);
    ensure(d("S/M/D/C", 8) == 2000, || format!("S/M/D/C at P=8 has {}", d("S/M/D/C", 8)))?;
    ensure(d("S", 8) == 10, || format!("S at P=8 has {}", d("S", 8)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let img = random_image(20, 20, 55);
    for _ in 0..50 {
        let text = random_scheme(&mut rng);
        let scheme = parse_scheme(&text).map_err(|e| e.to_string())?;
        let p = [4, 8, 12, 16, 24][rng.random_range(0..5)];
        let brute = brute_force_dimension(&scheme, p);
        let maps = extract_maps(&img, p, 2.0, &Riu2Mapper::new(p).unwrap()).unwrap();
        let built = build_histogram(&maps, &scheme).unwrap().len();
        let (fast, b) = (scheme_dimension(&scheme, p), brute);
        ensure(fast == b && built == b, || format!("{text} at P={p}: rule {fast}, oracle {b}, built {built}"))?;
    }
    Ok("2000, 10, and 50 random schemes match the enumeration oracle".into())
}

fn random_histogram(rng: &mut ChaCha8Rng, scheme: &SchemeExpr) -> FeatureHistogram {
    let n = scheme_dimension(scheme, 8);
    let raw: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() }).collect();
    let sum: f64 = raw.iter().sum();
    FeatureHistogram {
        scheme: scheme.clone(),
        neighbors: 8,
        radius: 2.0,
        dims: vec![n],
        bins: raw.iter().map(|v| v / sum).collect(),
    }
}

fn c6_chi_square_contract() -> Check {
    let scheme = parse_scheme("S/M").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut zero_pairs = 0;
    for i in 0..100 {
        let (t, m) = (random_histogram(&mut rng, &scheme), random_histogram(&mut rng, &scheme));
        let d = chi_square(&t, &m).map_err(|e| e.to_string())?;
        let back = chi_square(&m, &t).unwrap();
        ensure(chi_square(&t, &t).unwrap() == 0.0, || format!("pair {i}: D(T,T) != 0"))?;
        ensure(d.to_bits() == back.to_bits(), || format!("pair {i}: D(T,M)={d} but D(M,T)={back}"))?;
        ensure(d >= 0.0 && d.is_finite(), || format!("pair {i}: D={d}"))?;
        let mut expected = 0.0;
        for (a, b) in t.bins.iter().zip(&m.bins) {
            if a + b > 0.0 {
                expected += (a - b) * (a - b) / (a + b);
            } else {
                zero_pairs += 1;
            }
        }
        ensure(d == expected, || format!("pair {i}: D={d}, skipping 0/0 bins gives {expected}"))?;
    }
    ensure(zero_pairs > 0, || "no 0/0 bins were exercised".into())?;

    let models: Vec<(FeatureHistogram, usize)> = (0..30).map(|i| (random_histogram(&mut rng, &scheme), i % 5)).collect();
    let tests: Vec<FeatureHistogram> = (0..50).map(|_| random_histogram(&mut rng, &scheme)).collect();
    let set = ModelSet::new(models.clone()).unwrap();
    for k in [0.25, 3.0, 8.0, 1000.0] {
        let scaled = ModelSet::new(models.iter().map(|(h, l)| (h.scaled(k), *l)).collect()).unwrap();
        for (i, t) in tests.iter().enumerate() {
            let (a, b) = (classify(t, &set).unwrap(), classify(&t.scaled(k), &scaled).unwrap());
            ensure(a.index == b.index, || format!("test {i}: argmin {} became {} at scale {k}", a.index, b.index))?;
        }
    }
    Ok(format!("100 pairs ({zero_pairs} zero bins), argmin stable under 4 rescalings"))
}

fn c7_oracle_pipeline() -> Check {
    let mut compared = 0;
    for seed in 0..10 {
        let img = random_image(32, 32, 7000 + seed);
        for (p, r) in [(8, 2.0), (16, 3.0)] {
            let maps = extract_maps(&img, p, r, &Riu2Mapper::new(p).unwrap()).map_err(|e| e.to_string())?;
            for text in ["S", "S/M/D/C", "S_D_M/C"] {
                let fast = build_histogram(&maps, &parse_scheme(text).unwrap()).unwrap().bins;
                let slow = oracle::histogram(&img, p, r, text);
                ensure(fast == slow, || {
                    let first = fast.iter().zip(&slow).position(|(a, b)| a != b);
                    format!("image {seed}, (P,R)=({p},{r}), {text}: first differing bin {first:?}")
                })?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} histograms identical to the naive pipeline"))
}

fn synthetic_dir(tag: &str) -> tempfile::TempDir {
    tempfile::Builder::new().prefix(&format!("cldp-acceptance-{tag}")).tempdir().unwrap()
}

fn c8_synthetic_end_to_end() -> Check {
    let dir = synthetic_dir("c8");
    let start = Instant::now();
    let report = single_threaded(|| -> Result<_, String> {
        let params = SynthParams {
            seed: 8,
            classes: 3,
            samples_per_class: 10,
            size: 64,
        };
        let spec = make_synthetic_suite(&params, dir.path()).map_err(|e| e.to_string())?;
        let pipeline = FeaturePipeline::new(&parse_scheme("S/M/D/C").unwrap(), 8, 2.0, &RunOptions::default())
            .map_err(|e| e.to_string())?;
        run_suite_with(&spec, &pipeline).map_err(|e| e.to_string())
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    ensure(report.accuracy == 1.0, || format!("accuracy {}", report.accuracy))?;
    ensure(elapsed < 10.0, || format!("took {elapsed:.2} s single-threaded"))?;
    Ok(format!("accuracy 1.0 on {} test images in {elapsed:.2} s (1 thread)", report.total()))
}

fn c9_thread_determinism() -> Check {
    let dir = synthetic_dir("c9");
    make_synthetic_suite(&SynthParams { seed: 9, ..SynthParams::default() }, dir.path()).map_err(|e| e.to_string())?;
    let mut matrix = load_matrix(dir.path().join("matrix.toml")).map_err(|e| e.to_string())?;
    matrix.schemes.push(parse_scheme("S_D_M/C").unwrap());
    matrix.geometries.push((16, 3.0));
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let r = run_matrix(&matrix, None);
            (r.to_csv(), r.to_table(), r.to_json())
        })
    };
    let (one, eight) = (run(1), run(8));
    ensure(one == eight, || "reports differ between 1 and 8 threads".into())?;
    ensure(!one.0.contains("FAILED"), || format!("synthetic matrix failed:\n{}", one.0))?;
    Ok(format!("CSV, table and JSON byte-identical ({} bytes)", one.0.len() + one.1.len() + one.2.len()))
}

fn outex_root() -> Option<PathBuf> {
    std::env::var_os("OUTEX_ROOT").map(PathBuf::from)
}

fn outex_matrix(schemes: &[&str], geometries: &[(usize, f64)]) -> Result<ExperimentMatrix, String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../suites/outex");
    let suites = ["tc10.toml", "tc12-t184.toml", "tc12-horizon.toml"]
        .iter()
        .map(|f| SuiteConfig::from_file(dir.join(f)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let schemes = schemes.iter().map(|s| parse_scheme(s).unwrap()).collect();
    ExperimentMatrix::new(schemes, geometries.to_vec(), suites, Normalization::None).map_err(|e| e.to_string())
}

fn outex_cache() -> Option<PathBuf> {
    std::env::var_os("CLDP_CACHE_DIR").map(PathBuf::from)
}

fn within(value: f64, target: f64, tolerance: f64) -> bool {
    (100.0 * value - target).abs() <= tolerance
}

fn c10_cldp_best() -> Check {
    let matrix = outex_matrix(&["CLDP_S/M/D/C"], &[(8, 3.0)])?;
    let report = run_matrix(&matrix, outex_cache().as_deref());
    let avg = report.aggregate(0, 0, &cldp_core::suite::STANDARD_SUITES).ok_or_else(|| report.to_table())?;
    let tc10 = report.cells[0].accuracy.ok_or_else(|| report.to_table())?;
    let msg = format!("AVG3 {:.2}% (97.14 expected), TC10 {:.2}% (99.32 expected)", 100.0 * avg, 100.0 * tc10);
    ensure(within(avg, 97.14, 1.5) && within(tc10, 99.32, 1.5), || msg.clone())?;
    Ok(msg)
}

fn c11_clbp_baseline_and_ordering() -> Check {
    let matrix = outex_matrix(&["CLBP_S/M/C"], &[(24, 3.0)])?;
    let report = run_matrix(&matrix, outex_cache().as_deref());
    let avg = report.aggregate(0, 0, &cldp_core::suite::STANDARD_SUITES).ok_or_else(|| report.to_table())?;
    ensure(within(avg, 96.28, 1.5), || format!("AVG3 {:.2}% (96.28 expected)", 100.0 * avg))?;

    let pairs = ["CLBP_S", "CLDP_S/D", "CLBP_M", "CLDP_M/D", "CLBP_M/C", "CLDP_M/D/C", "CLBP_S_M/C", "CLDP_S_D_M/C"];
    let matrix = outex_matrix(&pairs, &GEOMETRIES)?;
    let report = run_matrix(&matrix, outex_cache().as_deref());
    for pair in 0..4 {
        for (gi, (p, r)) in GEOMETRIES.iter().enumerate() {
            let clbp = report.aggregate(2 * pair, gi, &cldp_core::suite::STANDARD_SUITES);
            let cldp = report.aggregate(2 * pair + 1, gi, &cldp_core::suite::STANDARD_SUITES);
            let (Some(a), Some(b)) = (clbp, cldp) else {
                return Err(report.to_table());
            };
            ensure(b > a, || format!("{} {:.2}% <= {} {:.2}% at ({p},{r})", pairs[2 * pair + 1], 100.0 * b, pairs[2 * pair], 100.0 * a))?;
        }
    }
    Ok(format!("CLBP_S/M/C (24,3) AVG3 {:.2}%; CLDP beats CLBP for the first four pairs at all six geometries", 100.0 * avg))
}

fn c12_delta_structure() -> Check {
    let matrix = outex_matrix(&["CLBP_S", "CLDP_S/D"], &[(8, 2.0)])?;
    let report = run_matrix(&matrix, outex_cache().as_deref());
    let a = report.aggregate(0, 0, &cldp_core::suite::STANDARD_SUITES).ok_or_else(|| report.to_table())?;
    let b = report.aggregate(1, 0, &cldp_core::suite::STANDARD_SUITES).ok_or_else(|| report.to_table())?;
    let delta = 100.0 * (b - a);
    ensure(delta >= 5.0, || format!("Δ = {delta:.2} points (at least 5 required)"))?;
    Ok(format!("CLBP_S {:.2}%, CLDP_S/D {:.2}%, Δ {delta:.2}", 100.0 * a, 100.0 * b))
}

fn main() -> ExitCode {
    let offline: [Criterion; 9] = [
        ("C1 riu2 combinatorics", c1_riu2_combinatorics),
        ("C2 mapper equivalence", c2_mapper_equivalence),
        ("C3 rotation invariance", c3_rotation_invariance),
        ("C4 affine invariance", c4_affine_invariance),
        ("C5 dimension rule", c5_dimension_rule),
        ("C6 chi-square contract", c6_chi_square_contract),
        ("C7 brute-force pipeline oracle", c7_oracle_pipeline),
        ("C8 synthetic end-to-end", c8_synthetic_end_to_end),
        ("C9 thread-count determinism", c9_thread_determinism),
    ];
    let dataset: [Criterion; 3] = [
        ("C10 CLDP_S/M/D/C (8,3) on Outex", c10_cldp_best),
        ("C11 CLBP_S/M/C (24,3) baseline and CLDP > CLBP ordering", c11_clbp_baseline_and_ordering),
        ("C12 Δ at (8,2) of at least 5 points", c12_delta_structure),
    ];
    let have_outex = outex_root().is_some();

    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| {
        match outcome {
            Outcome::Pass(d) => println!("PASS {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
            Outcome::Skip(d) => println!("SKIP {name}: {d}"),
        }
    };
    let run = |check: fn() -> Check| match std::panic::catch_unwind(check) {
        Ok(Ok(d)) => Outcome::Pass(d),
        Ok(Err(d)) => Outcome::Fail(d),
        Err(_) => Outcome::Fail("panicked".into()),
    };
    for (name, check) in offline {
        report(name, run(check));
    }
    for (name, check) in dataset {
        if have_outex {
            report(name, run(check));
        } else {
            report(name, Outcome::Skip("dataset absent (set OUTEX_ROOT to a local Outex TC10/TC12 copy)".into()));
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
