//! Criterion benchmarks for the percolab kernels live in `benches/`.
//!
//! `cargo bench -p percolab-bench` runs them.
