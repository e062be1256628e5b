//! Criterion benchmarks for cldp-core live in `benches/`.
