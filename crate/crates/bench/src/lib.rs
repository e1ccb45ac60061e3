//! Criterion benchmarks for the backbone kernels live in `benches/`.
