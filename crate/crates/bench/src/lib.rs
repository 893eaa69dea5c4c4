//! Criterion benchmarks for `realzeros`; see `benches/`.
