//! Benchmark workload families.

pub mod graph;
pub mod micro;
pub mod place;
