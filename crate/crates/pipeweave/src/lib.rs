//! Pipeweave: task-parallel pipeline scheduling without a data abstraction.
//!
//! The crate has three layers:
//!
//! * [`runtime`] — a small work-stealing task-graph executor with static,
//!   condition, runtime and module tasks. Condition tasks select one weak
//!   successor by return value; module tasks run a whole nested graph.
//! * [`pipeline`] — the pipeline scheduler built on that executor. A
//!   [`pipeline::Pipeline`] runs `P` pipes over `L` parallel lines with one
//!   scheduling token in flight per line, rotating tokens circularly across
//!   lines and resolving stage dependencies with an `L x P` matrix of atomic
//!   join counters. The library stores no user data: pipe callables receive
//!   a [`pipeline::Pipeflow`] token context and index their own buffers with
//!   it.
//! * [`trace`] — an event recorder plus a post-hoc validator that turns the
//!   scheduler's ordering guarantees (exactly-once per token and pipe, no
//!   stage skipped, pipe order, serial-stage order, one token per line) into
//!   mechanical checks, along with a brute-force dependency simulator used
//!   as an oracle.
//!
//! Diagnostics can be enabled with the `PIPEWEAVE_LOG` environment variable
//! (`off`, `info`, `trace`).
//!
//! ```
//! use pipeweave::pipeline::{Pipe, Pipeline};
//! use pipeweave::runtime::{Executor, TaskGraph};
//! use std::sync::atomic::{AtomicU64, Ordering};
//! use std::sync::Arc;
//!
//! let seen = Arc::new(AtomicU64::new(0));
//! let sink = seen.clone();
//! let pl = Pipeline::new(
//!     4,
//!     vec![
//!         Pipe::serial(|pf| {
//!             if pf.token() == 8 {
//!                 pf.stop();
//!             }
//!         }),
//!         Pipe::parallel(move |_pf| {
//!             sink.fetch_add(1, Ordering::Relaxed);
//!         }),
//!     ],
//! )
//! .unwrap();
//!
//! let mut graph = TaskGraph::new("app");
//! graph.composed_of(pl.graph()).unwrap();
//! let exec = Executor::new(2);
//! exec.run(&graph).unwrap().wait().unwrap();
//! assert_eq!(pl.num_tokens(), 8);
//! assert_eq!(seen.load(Ordering::Relaxed), 8);
//! ```

pub(crate) mod logging;

pub mod pipeline;
pub mod runtime;
pub mod trace;
