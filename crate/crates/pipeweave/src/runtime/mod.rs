//! Minimal work-stealing task-graph executor.
//!
//! Build a [`TaskGraph`] from static, condition, runtime and module tasks,
//! wire dependencies with [`TaskGraph::precede`], and run it on an
//! [`Executor`]. See the crate docs for the edge semantics.

mod executor;
mod graph;

pub use executor::{Executor, RunError, RunHandle, SchedulerHandle};
pub use graph::{GraphError, TaskGraph, TaskKind, TaskRef};

pub(crate) use executor::{current_worker_index, raise_contract_violation};
