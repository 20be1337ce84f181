//! Benchmarks for the decoding game live in `benches/`.
