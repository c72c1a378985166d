//! Criterion benchmarks for cvtrack; see `benches/`.
