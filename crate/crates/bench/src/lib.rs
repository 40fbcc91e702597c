//! Criterion benchmarks for `merw-core`; see `benches/`.
