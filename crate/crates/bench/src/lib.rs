//! Criterion benchmarks for the hot paths of `mictact`; see `benches/`.
