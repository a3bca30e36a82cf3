//! Workload library behind the `pipeweave-bench` binary.
//!
//! Three benchmark families drive the scheduler at desk scale — busy-spin
//! micro pipelines, levelized-graph propagation and detailed-placement
//! window reordering — plus an iterative rerun demo and helpers for CSV
//! emission and trace validation. Everything is callable as a library so
//! tests can check outcomes without shelling out.

pub mod csvout;
pub mod demo;
pub mod spec;
pub mod util;
pub mod workloads;
