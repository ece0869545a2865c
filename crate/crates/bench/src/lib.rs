//! Criterion benchmarks for martlab-core; see `benches/`.
