//! Criterion benchmarks for `negdiff-core`; see `benches/`.
