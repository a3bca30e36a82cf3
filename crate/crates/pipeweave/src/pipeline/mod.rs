//! Task-parallel pipeline scheduling.
//!
//! A [`Pipeline`] runs `P` pipes over `L` parallel lines with one scheduling
//! token in flight per line. Internally it is a task graph of just `L + 1`
//! nodes — one condition task plus one runtime task per line — no matter how
//! many tokens flow through:
//!
//! * the condition task starts the line of the next unadmitted token
//!   (`num_tokens % L`, which makes reruns resume where a stop left off);
//! * each runtime task repeatedly runs the pipe callable for its line's
//!   current token, then resolves what runs next with two atomic
//!   decrements on an `L x P` join-counter matrix: the same line's next
//!   pipe, and — after a serial pipe — the next line's same pipe. If both
//!   become ready, the next line is handed to the executor and the current
//!   worker continues on its own line to keep per-line data hot.
//!
//! A counter cell is reset to its pipe's type value (serial 2, parallel 1)
//! each time an invocation arrives at that cell. Before the first arrival a
//! cell's wrap-around predecessors do not exist, so construction seeds each
//! cell with its real first-round dependency count instead:
//! `[pipe > 0] + [serial pipe && line > 0]` — see
//! [`first_round_join_counters`]. The cell (0, 0) stores its type value but
//! is launched directly by the condition task before anything can decrement
//! it.
//!
//! The pipeline owns no data buffers. Applications keep their own storage,
//! typically indexed by [`Pipeflow::line`].

mod pipe;

pub use pipe::{Pipe, PipeType, Pipeflow};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use parking_lot::Mutex;

use crate::logging::log_trace;
use crate::runtime::{SchedulerHandle, TaskGraph, TaskRef};
use crate::trace::{TraceCollector, TraceEvent, TraceLog, UNKNOWN_WORKER};

/// Pipeline construction and reset errors.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("a pipeline needs at least one line")]
    NoLines,
    #[error("a pipeline needs at least one pipe")]
    NoPipes,
    #[error("the first pipe must be serial")]
    FirstPipeNotSerial,
    #[error("pipeline cannot be reset while running")]
    ResetWhileRunning,
}

/// First-round join-counter seed for every (line, pipe) cell.
///
/// A cell's steady-state reset value is its pipe's type value, but before
/// the first arrival only real predecessors may be counted: the same-line
/// previous pipe exists for `pipe > 0`, and the previous-line wrap exists at
/// serial pipes for `line > 0`. Cell (0, 0) holds its type value; it is
/// started directly and never consulted before its first reset.
pub fn first_round_join_counters(num_lines: usize, pipe_types: &[PipeType]) -> Vec<Vec<u64>> {
    (0..num_lines)
        .map(|line| {
            pipe_types
                .iter()
                .enumerate()
                .map(|(pipe, ptype)| {
                    if line == 0 && pipe == 0 {
                        ptype.counter_value()
                    } else {
                        u64::from(pipe > 0) + u64::from(ptype.is_serial() && line > 0)
                    }
                })
                .collect()
        })
        .collect()
}

/// Pipes plus their join-counter matrix; swapped wholesale when a scalable
/// pipeline is re-pointed at a new pipe range.
struct PipeSet {
    pipes: Vec<Pipe>,
    /// Row-major `L x P` counters.
    counters: Vec<AtomicU64>,
    num_lines: usize,
}

impl PipeSet {
    fn new(num_lines: usize, pipes: Vec<Pipe>) -> Self {
        let types: Vec<PipeType> = pipes.iter().map(Pipe::pipe_type).collect();
        let seed = first_round_join_counters(num_lines, &types);
        let counters = seed
            .into_iter()
            .flatten()
            .map(AtomicU64::new)
            .collect();
        PipeSet {
            pipes,
            counters,
            num_lines,
        }
    }

    fn num_pipes(&self) -> usize {
        self.pipes.len()
    }

    fn counter(&self, line: usize, pipe: usize) -> &AtomicU64 {
        &self.counters[line * self.num_pipes() + pipe]
    }

    /// Restore every counter to its first-round seed.
    fn reseed(&self) {
        let types: Vec<PipeType> = self.pipes.iter().map(Pipe::pipe_type).collect();
        for (line, row) in first_round_join_counters(self.num_lines, &types)
            .into_iter()
            .enumerate()
        {
            for (pipe, value) in row.into_iter().enumerate() {
                self.counter(line, pipe).store(value, Ordering::Release);
            }
        }
    }
}

struct PipelineCore {
    num_lines: usize,
    set: Mutex<Arc<PipeSet>>,
    /// Tokens admitted so far; persists across runs, cleared only by reset.
    num_tokens: AtomicU64,
    /// One token context per line, touched by at most one invocation at a
    /// time.
    contexts: Vec<Mutex<Pipeflow>>,
    /// Runtime-task handles, indexed by line; wired once at construction.
    line_tasks: OnceLock<Vec<TaskRef>>,
    trace: Option<TraceCollector>,
}

impl PipelineCore {
    fn current_set(&self) -> Arc<PipeSet> {
        self.set.lock().clone()
    }

    fn reset_contexts(&self) {
        for (line, ctx) in self.contexts.iter().enumerate() {
            let mut pf = ctx.lock();
            pf.line = line;
            pf.pipe = 0;
            pf.token = 0;
            pf.stop = false;
        }
    }
}

/// The runtime-task body for one line.
///
/// Loops over ready cells instead of returning to the executor: after each
/// callable it advances the line's context to the next pipe, decrements the
/// affected join counters and keeps going as long as some successor cell
/// became ready, following the next line when only that one did.
fn run_line(core: &PipelineCore, start_line: usize, handle: &SchedulerHandle<'_>) {
    let set = core.current_set();
    let num_pipes = set.num_pipes();
    let num_lines = core.num_lines;
    let line_tasks = core
        .line_tasks
        .get()
        .expect("line tasks wired at construction");

    let mut line = start_line;
    loop {
        let mut pf = core.contexts[line].lock();
        debug_assert_eq!(pf.line, line, "context bound to the wrong line");
        let pipe = pf.pipe;
        let ptype = set.pipes[pipe].pipe_type();

        // Arriving resets this cell to its steady-state value; every future
        // decrement of it depends on this invocation completing.
        set.counter(line, pipe)
            .store(ptype.counter_value(), Ordering::Release);

        let begin_seq = core.trace.as_ref().map(|t| t.next_seq());
        if pipe == 0 {
            pf.token = core.num_tokens.load(Ordering::Acquire);
            pf.stop = false;
            (set.pipes[0].callable)(&mut pf);
            if pf.stop {
                // Token abandoned: not counted, nothing fired; other lines
                // drain on their own.
                log_trace!("line {line}: stop requested at token {}", pf.token);
                return;
            }
            core.num_tokens.fetch_add(1, Ordering::AcqRel);
        } else {
            (set.pipes[pipe].callable)(&mut pf);
            if pf.stop {
                crate::runtime::raise_contract_violation(format!(
                    "stop() called from pipe {pipe}; only the first pipe may stop the pipeline"
                ));
            }
        }
        if let (Some(trace), Some(begin_seq)) = (core.trace.as_ref(), begin_seq) {
            trace.record(TraceEvent {
                token: pf.token,
                line,
                pipe,
                begin_seq,
                end_seq: trace.next_seq(),
                worker: crate::runtime::current_worker_index().unwrap_or(UNKNOWN_WORKER),
            });
        }

        let next_pipe = (pipe + 1) % num_pipes;
        let next_line = (line + 1) % num_lines;
        pf.pipe = next_pipe;
        drop(pf);

        // A serial pipe completion also releases the same pipe on the next
        // line; every completion releases the next pipe on this line.
        let mut next_line_ready = false;
        if ptype.is_serial() {
            let prev = set.counter(next_line, pipe).fetch_sub(1, Ordering::AcqRel);
            debug_assert!(
                prev > 0,
                "join counter underflow at line {next_line}, pipe {pipe}"
            );
            next_line_ready = prev == 1;
        }
        let prev = set.counter(line, next_pipe).fetch_sub(1, Ordering::AcqRel);
        debug_assert!(
            prev > 0,
            "join counter underflow at line {line}, pipe {next_pipe}"
        );
        let same_line_ready = prev == 1;

        match (same_line_ready, next_line_ready) {
            (true, true) => {
                // Hand the next line to another worker and stay on this
                // line, which keeps the line's data local to this worker.
                handle
                    .schedule(line_tasks[next_line])
                    .expect("line task belongs to the pipeline graph");
            }
            (true, false) => {}
            (false, true) => line = next_line,
            (false, false) => return,
        }
    }
}

fn validate_shape(num_lines: usize, pipes: &[Pipe]) -> Result<(), PipelineError> {
    if num_lines == 0 {
        return Err(PipelineError::NoLines);
    }
    if pipes.is_empty() {
        return Err(PipelineError::NoPipes);
    }
    if !pipes[0].pipe_type().is_serial() {
        return Err(PipelineError::FirstPipeNotSerial);
    }
    Ok(())
}

/// A pipeline with a fixed pipe sequence.
///
/// Compose it into an application graph with
/// [`TaskGraph::composed_of`]`(pipeline.graph())`, or run [`graph`] directly.
/// [`num_tokens`] persists across runs so a rerun resumes with the next
/// unadmitted token; [`reset`] starts over from token zero.
///
/// [`graph`]: Pipeline::graph
/// [`num_tokens`]: Pipeline::num_tokens
/// [`reset`]: Pipeline::reset
pub struct Pipeline {
    core: Arc<PipelineCore>,
    graph: TaskGraph,
}

impl Pipeline {
    /// Build a pipeline of `num_lines` lines over `pipes`.
    ///
    /// The first pipe must be serial: token admission and stop requests
    /// require the first pipe to run tokens one at a time, in order.
    pub fn new(num_lines: usize, pipes: Vec<Pipe>) -> Result<Self, PipelineError> {
        Self::build(num_lines, pipes, false)
    }

    /// Like [`Pipeline::new`] with trace recording enabled. Tracing costs
    /// two atomic increments and one queue push per invocation; an untraced
    /// pipeline pays nothing.
    pub fn traced(num_lines: usize, pipes: Vec<Pipe>) -> Result<Self, PipelineError> {
        Self::build(num_lines, pipes, true)
    }

    fn build(num_lines: usize, pipes: Vec<Pipe>, traced: bool) -> Result<Self, PipelineError> {
        validate_shape(num_lines, &pipes)?;
        let core = Arc::new(PipelineCore {
            num_lines,
            set: Mutex::new(Arc::new(PipeSet::new(num_lines, pipes))),
            num_tokens: AtomicU64::new(0),
            contexts: (0..num_lines)
                .map(|line| {
                    Mutex::new(Pipeflow {
                        line,
                        pipe: 0,
                        token: 0,
                        stop: false,
                    })
                })
                .collect(),
            line_tasks: OnceLock::new(),
            trace: traced.then(TraceCollector::new),
        });

        // One condition task picks the line of the next token; one runtime
        // task per line does the rest. L + 1 nodes run any number of tokens.
        let mut graph = TaskGraph::new("pipeline");
        let cond = {
            let core = core.clone();
            graph.emplace_condition(move || {
                (core.num_tokens.load(Ordering::Acquire) % core.num_lines as u64) as usize
            })
        };
        let line_tasks: Vec<TaskRef> = (0..num_lines)
            .map(|line| {
                let core = core.clone();
                graph.emplace_runtime(move |handle| run_line(&core, line, handle))
            })
            .collect();
        graph
            .precede(cond, &line_tasks)
            .expect("fresh graph accepts the line edges");
        core.line_tasks
            .set(line_tasks)
            .unwrap_or_else(|_| unreachable!("line tasks set once"));

        Ok(Pipeline { core, graph })
    }

    /// The internal task graph; run it directly or compose it as a module
    /// task of a larger graph.
    pub fn graph(&self) -> &TaskGraph {
        &self.graph
    }

    pub fn num_lines(&self) -> usize {
        self.core.num_lines
    }

    pub fn num_pipes(&self) -> usize {
        self.core.current_set().num_pipes()
    }

    /// Tokens admitted so far. Persists across runs; cleared by [`reset`].
    ///
    /// [`reset`]: Pipeline::reset
    pub fn num_tokens(&self) -> u64 {
        self.core.num_tokens.load(Ordering::Acquire)
    }

    /// Pipe types in pipe order.
    pub fn pipe_types(&self) -> Vec<PipeType> {
        self.core
            .current_set()
            .pipes
            .iter()
            .map(Pipe::pipe_type)
            .collect()
    }

    /// Forget all progress: token counter to zero, join counters to their
    /// first-round seeds, every line context back to pipe 0. Also the way
    /// to make a pipeline reusable after a failed run.
    pub fn reset(&mut self) -> Result<(), PipelineError> {
        self.reset_with(None)
    }

    fn reset_with(&mut self, new_pipes: Option<Vec<Pipe>>) -> Result<(), PipelineError> {
        if self.graph.is_running() {
            return Err(PipelineError::ResetWhileRunning);
        }
        let mut set = self.core.set.lock();
        match new_pipes {
            Some(pipes) => *set = Arc::new(PipeSet::new(self.core.num_lines, pipes)),
            None => set.reseed(),
        }
        drop(set);
        self.core.num_tokens.store(0, Ordering::Release);
        self.core.reset_contexts();
        Ok(())
    }

    /// Drain recorded events into a [`TraceLog`] snapshotting the current
    /// shape and token count. Returns `None` for untraced pipelines.
    pub fn take_trace(&self) -> Option<TraceLog> {
        let trace = self.core.trace.as_ref()?;
        let mut events = trace.drain();
        events.sort_by_key(|e| e.begin_seq);
        Some(TraceLog {
            num_lines: self.core.num_lines,
            pipe_types: self.pipe_types(),
            num_tokens: self.num_tokens(),
            events,
        })
    }
}

/// A pipeline whose pipes are assigned at run time and may be re-pointed
/// between runs, changing the pipe count.
pub struct ScalablePipeline {
    inner: Pipeline,
}

impl ScalablePipeline {
    pub fn new(num_lines: usize, pipes: Vec<Pipe>) -> Result<Self, PipelineError> {
        Ok(ScalablePipeline {
            inner: Pipeline::new(num_lines, pipes)?,
        })
    }

    pub fn traced(num_lines: usize, pipes: Vec<Pipe>) -> Result<Self, PipelineError> {
        Ok(ScalablePipeline {
            inner: Pipeline::traced(num_lines, pipes)?,
        })
    }

    /// Re-point the pipeline at a new pipe sequence: the token counter is
    /// zeroed and join counters return to first-round seeds, exactly as in
    /// a fresh pipeline of the new shape.
    pub fn reset_pipes(&mut self, pipes: Vec<Pipe>) -> Result<(), PipelineError> {
        validate_shape(self.inner.core.num_lines, &pipes)?;
        self.inner.reset_with(Some(pipes))
    }

    /// Start over with the current pipes; see [`Pipeline::reset`].
    pub fn reset(&mut self) -> Result<(), PipelineError> {
        self.inner.reset()
    }

    pub fn graph(&self) -> &TaskGraph {
        self.inner.graph()
    }

    pub fn num_lines(&self) -> usize {
        self.inner.num_lines()
    }

    pub fn num_pipes(&self) -> usize {
        self.inner.num_pipes()
    }

    pub fn num_tokens(&self) -> u64 {
        self.inner.num_tokens()
    }

    pub fn pipe_types(&self) -> Vec<PipeType> {
        self.inner.pipe_types()
    }

    pub fn take_trace(&self) -> Option<TraceLog> {
        self.inner.take_trace()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_pipe_must_be_serial() {
        let pipes = vec![Pipe::parallel(|_| {}), Pipe::serial(|_| {})];
        assert_eq!(
            Pipeline::new(4, pipes).err(),
            Some(PipelineError::FirstPipeNotSerial)
        );
    }

    #[test]
    fn empty_pipes_rejected() {
        assert_eq!(Pipeline::new(4, vec![]).err(), Some(PipelineError::NoPipes));
    }

    #[test]
    fn zero_lines_rejected() {
        assert_eq!(
            Pipeline::new(0, vec![Pipe::serial(|_| {})]).err(),
            Some(PipelineError::NoLines)
        );
    }

    #[test]
    fn graph_has_one_condition_plus_one_task_per_line() {
        let pl = Pipeline::new(4, vec![Pipe::serial(|_| {})]).unwrap();
        assert_eq!(pl.graph().len(), 5);
        let pl = Pipeline::new(1, vec![Pipe::serial(|_| {})]).unwrap();
        assert_eq!(pl.graph().len(), 2);
    }

    #[test]
    fn degenerate_single_line_single_pipe_is_valid() {
        let pl = Pipeline::new(1, vec![Pipe::serial(|_| {})]).unwrap();
        assert_eq!(pl.num_lines(), 1);
        assert_eq!(pl.num_pipes(), 1);
        assert_eq!(pl.num_tokens(), 0);
    }

    #[test]
    fn first_round_seed_matches_hand_counts() {
        use PipeType::{Parallel as P, Serial as S};
        let seed = first_round_join_counters(4, &[S, P, S]);
        // (0,0) carries its type value; the rest are real first-round
        // predecessor counts.
        assert_eq!(seed[0], vec![2, 1, 1]);
        for line in 1..4 {
            assert_eq!(seed[line], vec![1, 1, 2]);
        }
    }
}
