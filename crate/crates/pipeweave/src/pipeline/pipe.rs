//! Pipe (stage) declarations and the per-line token context.

use std::fmt;
use std::sync::Arc;

/// Whether invocations of a pipe on different tokens may overlap.
///
/// The variants double as the join-counter reset values: a serial pipe has
/// up to two unmet dependencies per visit (previous pipe on the same line,
/// same pipe on the previous line), a parallel pipe has one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PipeType {
    Serial,
    Parallel,
}

impl PipeType {
    /// Join-counter reset value: 2 for serial, 1 for parallel.
    pub fn counter_value(self) -> u64 {
        match self {
            PipeType::Serial => 2,
            PipeType::Parallel => 1,
        }
    }

    pub fn is_serial(self) -> bool {
        self == PipeType::Serial
    }
}

impl fmt::Display for PipeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipeType::Serial => f.write_str("serial"),
            PipeType::Parallel => f.write_str("parallel"),
        }
    }
}

/// One pipeline stage: a type and a callable taking the token context.
///
/// Callables run on arbitrary worker threads. A serial pipe's callable is
/// never invoked concurrently with itself; a parallel pipe's callable may
/// be, on different tokens.
#[derive(Clone)]
pub struct Pipe {
    pub(crate) pipe_type: PipeType,
    pub(crate) callable: Arc<dyn Fn(&mut Pipeflow) + Send + Sync>,
}

impl Pipe {
    pub fn new(pipe_type: PipeType, f: impl Fn(&mut Pipeflow) + Send + Sync + 'static) -> Self {
        Pipe {
            pipe_type,
            callable: Arc::new(f),
        }
    }

    pub fn serial(f: impl Fn(&mut Pipeflow) + Send + Sync + 'static) -> Self {
        Pipe::new(PipeType::Serial, f)
    }

    pub fn parallel(f: impl Fn(&mut Pipeflow) + Send + Sync + 'static) -> Self {
        Pipe::new(PipeType::Parallel, f)
    }

    pub fn pipe_type(&self) -> PipeType {
        self.pipe_type
    }
}

impl fmt::Debug for Pipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipe")
            .field("pipe_type", &self.pipe_type)
            .finish_non_exhaustive()
    }
}

/// The scheduling token handed to pipe callables.
///
/// Exactly one context exists per line; the scheduler moves it from pipe to
/// pipe as the line's current token advances. `line()` is the index
/// applications use for their own per-line buffers.
#[derive(Debug)]
pub struct Pipeflow {
    pub(crate) line: usize,
    pub(crate) pipe: usize,
    pub(crate) token: u64,
    pub(crate) stop: bool,
}

impl Pipeflow {
    /// Line this token runs on; always `token() % num_lines`.
    pub fn line(&self) -> usize {
        self.line
    }

    /// Pipe currently executing.
    pub fn pipe(&self) -> usize {
        self.pipe
    }

    /// Token number, assigned by the first pipe in admission order.
    pub fn token(&self) -> u64 {
        self.token
    }

    /// Request the pipeline to stop.
    ///
    /// Only meaningful from the first pipe: the current token is abandoned
    /// (not counted, no successors fired) and in-flight tokens on other
    /// lines drain. Calling this from any other pipe is a contract
    /// violation surfaced when the run is waited on.
    pub fn stop(&mut self) {
        self.stop = true;
    }
}
