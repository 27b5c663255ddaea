//! Benchmarks for the synthesis and moment routines; see `benches/`.
