//! Benchmarks for the agecontrol solvers live in `benches/`.
