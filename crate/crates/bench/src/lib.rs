//! Criterion benchmarks for gamecert; see `benches/`.
