//! Criterion benchmarks for the numerical kernels; run with `cargo bench -p bosegas-bench`.
