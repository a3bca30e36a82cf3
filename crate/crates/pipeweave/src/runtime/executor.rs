//! Work-stealing executor.
//!
//! Each worker owns a deque; it pushes and pops its own work from one end
//! while idle workers steal from the other. New runs enter through a shared
//! injector queue. An idle worker spins briefly, then parks on a condition
//! variable with a timeout so a missed notification can never strand work.
//!
//! A run is tracked by a topology: a counter of outstanding node executions.
//! Module tasks open a child topology for the inner graph and finish (firing
//! their own successors) only when the child drains. Callable panics abort
//! the run: queued nodes of that run are discarded while in-flight callables
//! finish, and the first error is surfaced at [`RunHandle::wait`].

use std::cell::RefCell;
use std::iter;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Weak};
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam::deque::{Injector, Stealer, Worker as WorkerQueue};
use parking_lot::{Condvar, Mutex};

use crate::logging::{log_info, log_trace};
use crate::runtime::graph::{GraphCore, TaskRef, Work};
use crate::runtime::TaskGraph;

/// Park timeout for idle workers; doubles as the backstop against lost
/// wakeups.
const PARK_TIMEOUT: Duration = Duration::from_millis(10);
/// Idle scan rounds before a worker parks.
const SPIN_ROUNDS: u32 = 64;

/// Execution-time errors, surfaced by [`RunHandle::wait`] or
/// [`Executor::run`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    /// The graph is already running on some executor.
    #[error("graph `{0}` is already running")]
    GraphBusy(String),
    /// A task callable panicked; the run was aborted after draining.
    #[error("task callable panicked: {0}")]
    TaskPanicked(String),
    /// A usage-contract violation detected during execution.
    #[error("contract violation: {0}")]
    ContractViolation(String),
}

/// Panic payload used internally to surface contract violations raised from
/// inside callables as typed errors instead of plain panics.
pub(crate) struct ContractViolationPanic(pub(crate) String);

pub(crate) fn raise_contract_violation(msg: String) -> ! {
    panic::panic_any(ContractViolationPanic(msg))
}

struct Job {
    topo: Arc<Topology>,
    node: usize,
}

/// Shared state of one `Executor::run` call, including all module
/// sub-topologies spawned by it.
struct RunState {
    status: Mutex<Option<Result<(), RunError>>>,
    cv: Condvar,
    failed: AtomicBool,
    error: Mutex<Option<RunError>>,
}

impl RunState {
    fn new() -> Arc<Self> {
        Arc::new(RunState {
            status: Mutex::new(None),
            cv: Condvar::new(),
            failed: AtomicBool::new(false),
            error: Mutex::new(None),
        })
    }

    fn fail(&self, err: RunError) {
        let mut slot = self.error.lock();
        if slot.is_none() {
            log_info!("run aborted: {err}");
            *slot = Some(err);
        }
        self.failed.store(true, Ordering::Release);
    }
}

/// One running graph instance: the root graph of a run, or the inner graph
/// of a module task.
struct Topology {
    run: Arc<RunState>,
    graph: Arc<GraphCore>,
    /// Outstanding scheduled-but-unfinished node executions.
    active: AtomicU64,
    /// For module sub-topologies: the enclosing topology and the module
    /// node to finish once this one drains.
    parent: Option<(Arc<Topology>, usize)>,
}

struct SleepQueue {
    lock: Mutex<()>,
    cv: Condvar,
}

struct ExecutorCore {
    injector: Injector<Job>,
    stealers: Vec<Stealer<Job>>,
    sleep: SleepQueue,
    shutdown: AtomicBool,
    worker_count: usize,
}

impl ExecutorCore {
    fn has_visible_work(&self) -> bool {
        !self.injector.is_empty() || self.stealers.iter().any(|s| !s.is_empty())
    }

    /// Wake one parked worker. Taking the sleep lock orders this call with
    /// the emptiness re-check a parking worker performs under the same lock.
    fn notify_one(&self) {
        drop(self.sleep.lock.lock());
        self.sleep.cv.notify_one();
    }

    fn notify_all(&self) {
        drop(self.sleep.lock.lock());
        self.sleep.cv.notify_all();
    }
}

thread_local! {
    static WORKER_TLS: RefCell<Option<WorkerTls>> = const { RefCell::new(None) };
}

struct WorkerTls {
    core: Weak<ExecutorCore>,
    index: u32,
}

/// Index of the executor worker running the current thread, if any.
pub(crate) fn current_worker_index() -> Option<u32> {
    WORKER_TLS.with(|tls| tls.borrow().as_ref().map(|w| w.index))
}

/// A work-stealing executor with a fixed set of worker threads.
///
/// Dropping the executor waits for all queued work to finish before joining
/// the workers.
pub struct Executor {
    core: Arc<ExecutorCore>,
    threads: Vec<JoinHandle<()>>,
}

impl Executor {
    /// Create an executor with `workers` worker threads (at least one).
    pub fn new(workers: usize) -> Self {
        assert!(workers >= 1, "executor needs at least one worker");
        let queues: Vec<WorkerQueue<Job>> =
            (0..workers).map(|_| WorkerQueue::new_lifo()).collect();
        let stealers = queues.iter().map(|q| q.stealer()).collect();
        let core = Arc::new(ExecutorCore {
            injector: Injector::new(),
            stealers,
            sleep: SleepQueue {
                lock: Mutex::new(()),
                cv: Condvar::new(),
            },
            shutdown: AtomicBool::new(false),
            worker_count: workers,
        });
        let threads = queues
            .into_iter()
            .enumerate()
            .map(|(i, queue)| {
                let core = core.clone();
                std::thread::Builder::new()
                    .name(format!("pipeweave-worker-{i}"))
                    .spawn(move || worker_main(core, queue, i as u32))
                    .expect("spawn worker thread")
            })
            .collect();
        Executor { core, threads }
    }

    /// Create an executor sized to the host's available parallelism.
    pub fn with_hardware_parallelism() -> Self {
        let n = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        Executor::new(n)
    }

    pub fn worker_count(&self) -> usize {
        self.core.worker_count
    }

    /// Start a run of `graph`: reset its join counters, schedule its source
    /// nodes and return a handle to wait on.
    ///
    /// Fails if the graph is already running anywhere.
    pub fn run(&self, graph: &TaskGraph) -> Result<RunHandle, RunError> {
        let core = graph.core.clone();
        if core
            .running
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .is_err()
        {
            return Err(RunError::GraphBusy(core.name.clone()));
        }
        let run = RunState::new();
        let topo = Arc::new(Topology {
            run: run.clone(),
            graph: core,
            active: AtomicU64::new(0),
            parent: None,
        });
        let sources = topo.graph.reset_and_sources();
        log_trace!(
            "run graph `{}`: {} source(s)",
            topo.graph.name,
            sources.len()
        );
        if sources.is_empty() {
            complete_topology(&self.core, None, &topo);
        } else {
            topo.active.store(sources.len() as u64, Ordering::Release);
            for s in sources {
                self.core.injector.push(Job {
                    topo: topo.clone(),
                    node: s,
                });
            }
            self.core.notify_all();
        }
        Ok(RunHandle {
            run,
            core: self.core.clone(),
        })
    }
}

impl Drop for Executor {
    fn drop(&mut self) {
        self.core.shutdown.store(true, Ordering::Release);
        self.core.notify_all();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

/// Handle to a running (or finished) graph execution.
pub struct RunHandle {
    run: Arc<RunState>,
    core: Arc<ExecutorCore>,
}

impl RunHandle {
    /// Result if the run has already finished.
    pub fn try_result(&self) -> Option<Result<(), RunError>> {
        self.run.status.lock().clone()
    }

    /// Block until the run finishes and return its result. Waiting again
    /// returns the cached result.
    ///
    /// When called from a worker thread of the same executor (for example
    /// from inside a task callable) the thread keeps executing queued work
    /// while it waits, so nested runs cannot starve the pool.
    pub fn wait(&self) -> Result<(), RunError> {
        let on_own_worker = WORKER_TLS.with(|tls| {
            tls.borrow()
                .as_ref()
                .map(|w| {
                    w.core
                        .upgrade()
                        .is_some_and(|c| Arc::ptr_eq(&c, &self.core))
                })
                .unwrap_or(false)
        });
        if on_own_worker {
            self.wait_helping()
        } else {
            let mut status = self.run.status.lock();
            while status.is_none() {
                self.run.cv.wait(&mut status);
            }
            status.clone().expect("status set")
        }
    }

    /// Work-while-waiting loop for worker threads. Successor jobs produced
    /// here land on a scratch queue no stealer knows about, so anything left
    /// over is drained back to the injector before returning.
    fn wait_helping(&self) -> Result<(), RunError> {
        let scratch: WorkerQueue<Job> = WorkerQueue::new_lifo();
        let result = loop {
            if let Some(r) = self.try_result() {
                break r;
            }
            if let Some(job) = find_task(&scratch, &self.core) {
                execute(&self.core, &scratch, job);
            } else {
                let mut guard = self.core.sleep.lock.lock();
                if self.try_result().is_none() && !self.core.has_visible_work() {
                    self.core
                        .sleep
                        .cv
                        .wait_for(&mut guard, Duration::from_micros(200));
                }
            }
        };
        let mut drained = false;
        while let Some(job) = scratch.pop() {
            self.core.injector.push(job);
            drained = true;
        }
        if drained {
            self.core.notify_all();
        }
        result
    }
}

fn find_task(local: &WorkerQueue<Job>, core: &ExecutorCore) -> Option<Job> {
    local.pop().or_else(|| {
        iter::repeat_with(|| {
            core.injector
                .steal_batch_and_pop(local)
                .or_else(|| core.stealers.iter().map(|s| s.steal()).collect())
        })
        .find(|s| !s.is_retry())
        .and_then(|s| s.success())
    })
}

fn worker_main(core: Arc<ExecutorCore>, queue: WorkerQueue<Job>, index: u32) {
    WORKER_TLS.with(|tls| {
        *tls.borrow_mut() = Some(WorkerTls {
            core: Arc::downgrade(&core),
            index,
        });
    });
    let mut idle_rounds = 0u32;
    loop {
        if let Some(job) = find_task(&queue, &core) {
            idle_rounds = 0;
            execute(&core, &queue, job);
            continue;
        }
        // Exit only with empty queues so queued runs finish before shutdown.
        if core.shutdown.load(Ordering::Acquire) {
            break;
        }
        idle_rounds += 1;
        if idle_rounds < SPIN_ROUNDS {
            std::thread::yield_now();
            continue;
        }
        let mut guard = core.sleep.lock.lock();
        if core.has_visible_work() || core.shutdown.load(Ordering::Acquire) {
            continue;
        }
        core.sleep.cv.wait_for(&mut guard, PARK_TIMEOUT);
        idle_rounds = 0;
    }
    WORKER_TLS.with(|tls| tls.borrow_mut().take());
}

/// Handle given to runtime-task callables for interacting with the executor.
///
/// Valid only for the duration of the callable invocation; the effect of
/// [`schedule`](SchedulerHandle::schedule) outlives the call.
pub struct SchedulerHandle<'a> {
    core: &'a Arc<ExecutorCore>,
    local: &'a WorkerQueue<Job>,
    topo: &'a Arc<Topology>,
}

impl SchedulerHandle<'_> {
    /// Enqueue `task` for execution by some worker. The job is pushed onto
    /// the calling worker's deque and may be stolen by idle workers.
    ///
    /// `task` must belong to the graph the current runtime task runs in;
    /// scheduling a node of a different graph is a contract violation.
    pub fn schedule(&self, task: TaskRef) -> Result<(), RunError> {
        if task.graph != self.topo.graph.id {
            return Err(RunError::ContractViolation(format!(
                "scheduled task belongs to a different graph than `{}`",
                self.topo.graph.name
            )));
        }
        if task.index >= self.topo.graph.nodes.read().len() {
            return Err(RunError::ContractViolation(format!(
                "scheduled task index {} out of range in graph `{}`",
                task.index, self.topo.graph.name
            )));
        }
        schedule_node(self.core, Some(self.local), self.topo, task.index);
        Ok(())
    }
}

fn schedule_node(
    core: &Arc<ExecutorCore>,
    local: Option<&WorkerQueue<Job>>,
    topo: &Arc<Topology>,
    node: usize,
) {
    topo.active.fetch_add(1, Ordering::Relaxed);
    let job = Job {
        topo: topo.clone(),
        node,
    };
    match local {
        Some(queue) => queue.push(job),
        None => core.injector.push(job),
    }
    core.notify_one();
}

fn panic_to_error(payload: Box<dyn std::any::Any + Send>) -> RunError {
    if let Some(cv) = payload.downcast_ref::<ContractViolationPanic>() {
        return RunError::ContractViolation(cv.0.clone());
    }
    let msg = payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "non-string panic payload".to_string());
    RunError::TaskPanicked(msg)
}

fn execute(core: &Arc<ExecutorCore>, local: &WorkerQueue<Job>, job: Job) {
    let Job { topo, node } = job;
    // Drain mode: a failed run discards queued callables but still counts
    // them down so the topology completes.
    if topo.run.failed.load(Ordering::Acquire) {
        finish_node(core, Some(local), &topo);
        return;
    }
    let work = {
        let nodes = topo.graph.nodes.read();
        let n = &nodes[node];
        // Re-arm the join counter at invocation so cyclic control flow
        // (condition loops) sees a fresh round.
        n.join.store(n.strong_deps, Ordering::Release);
        n.work.clone()
    };
    match work {
        Work::Static(f) => {
            if let Err(p) = panic::catch_unwind(AssertUnwindSafe(|| f())) {
                topo.run.fail(panic_to_error(p));
            }
            fire_strong_successors(core, Some(local), &topo, node);
            finish_node(core, Some(local), &topo);
        }
        Work::Condition(f) => {
            match panic::catch_unwind(AssertUnwindSafe(|| f())) {
                Ok(choice) => {
                    let target = {
                        let nodes = topo.graph.nodes.read();
                        nodes[node].weak_successors.get(choice).copied()
                    };
                    match target {
                        Some(t) => schedule_node(core, Some(local), &topo, t),
                        None => {
                            // Out-of-range index terminates the branch.
                            if cfg!(debug_assertions) {
                                log_info!(
                                    "condition node {node} in `{}` returned {choice} \
                                     with no matching successor; branch ends",
                                    topo.graph.name
                                );
                            }
                        }
                    }
                }
                Err(p) => topo.run.fail(panic_to_error(p)),
            }
            finish_node(core, Some(local), &topo);
        }
        Work::Runtime(f) => {
            let handle = SchedulerHandle {
                core,
                local,
                topo: &topo,
            };
            if let Err(p) = panic::catch_unwind(AssertUnwindSafe(|| f(&handle))) {
                topo.run.fail(panic_to_error(p));
            }
            fire_strong_successors(core, Some(local), &topo, node);
            finish_node(core, Some(local), &topo);
        }
        Work::Module(inner) => start_module(core, local, &topo, node, inner),
    }
}

/// Decrement the join counters of `node`'s strong successors and schedule
/// every one that reaches zero.
fn fire_strong_successors(
    core: &Arc<ExecutorCore>,
    local: Option<&WorkerQueue<Job>>,
    topo: &Arc<Topology>,
    node: usize,
) {
    if topo.run.failed.load(Ordering::Acquire) {
        return;
    }
    let ready: Vec<usize> = {
        let nodes = topo.graph.nodes.read();
        nodes[node]
            .strong_successors
            .iter()
            .filter(|&&s| {
                let prev = nodes[s].join.fetch_sub(1, Ordering::AcqRel);
                debug_assert!(prev > 0, "join counter underflow at node {s}");
                prev == 1
            })
            .copied()
            .collect()
    };
    for s in ready {
        schedule_node(core, local, topo, s);
    }
}

fn finish_node(core: &Arc<ExecutorCore>, local: Option<&WorkerQueue<Job>>, topo: &Arc<Topology>) {
    if topo.active.fetch_sub(1, Ordering::AcqRel) == 1 {
        complete_topology(core, local, topo);
    }
}

fn complete_topology(
    core: &Arc<ExecutorCore>,
    local: Option<&WorkerQueue<Job>>,
    topo: &Arc<Topology>,
) {
    // Release the graph before waking anyone who might re-run it.
    topo.graph.running.store(false, Ordering::Release);
    match &topo.parent {
        Some((parent, module_node)) => {
            log_trace!("module graph `{}` completed", topo.graph.name);
            fire_strong_successors(core, local, parent, *module_node);
            finish_node(core, local, parent);
        }
        None => {
            let result = match topo.run.error.lock().take() {
                Some(err) => Err(err),
                None => Ok(()),
            };
            *topo.run.status.lock() = Some(result);
            topo.run.cv.notify_all();
            // Wake helpers parked on the executor sleep queue.
            core.notify_all();
        }
    }
}

fn start_module(
    core: &Arc<ExecutorCore>,
    local: &WorkerQueue<Job>,
    topo: &Arc<Topology>,
    module_node: usize,
    inner: Arc<GraphCore>,
) {
    if inner
        .running
        .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
        .is_err()
    {
        topo.run.fail(RunError::ContractViolation(format!(
            "module task ran graph `{}` while it was already running",
            inner.name
        )));
        finish_node(core, Some(local), topo);
        return;
    }
    let sources = inner.reset_and_sources();
    let sub = Arc::new(Topology {
        run: topo.run.clone(),
        graph: inner,
        active: AtomicU64::new(0),
        parent: Some((topo.clone(), module_node)),
    });
    if sources.is_empty() {
        complete_topology(core, Some(local), &sub);
        return;
    }
    sub.active.store(sources.len() as u64, Ordering::Release);
    for s in sources {
        local.push(Job {
            topo: sub.clone(),
            node: s,
        });
    }
    core.notify_all();
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    #[test]
    fn empty_graph_resolves_immediately() {
        let exec = Executor::new(2);
        let g = TaskGraph::new("empty");
        let h = exec.run(&g).unwrap();
        assert_eq!(h.wait(), Ok(()));
    }

    #[test]
    fn independent_tasks_all_execute_once() {
        let exec = Executor::new(4);
        let mut g = TaskGraph::new("g");
        let count = Arc::new(AtomicUsize::new(0));
        for _ in 0..16 {
            let count = count.clone();
            g.emplace_static(move || {
                count.fetch_add(1, Ordering::Relaxed);
            });
        }
        exec.run(&g).unwrap().wait().unwrap();
        assert_eq!(count.load(Ordering::Relaxed), 16);
    }

    #[test]
    fn concurrent_run_of_same_graph_is_rejected() {
        let exec = Executor::new(2);
        let mut g = TaskGraph::new("busy");
        let gate = Arc::new(AtomicBool::new(false));
        {
            let gate = gate.clone();
            g.emplace_static(move || {
                while !gate.load(Ordering::Acquire) {
                    std::thread::yield_now();
                }
            });
        }
        let h = exec.run(&g).unwrap();
        assert!(matches!(exec.run(&g), Err(RunError::GraphBusy(_))));
        gate.store(true, Ordering::Release);
        h.wait().unwrap();
        // finished graphs can run again
        exec.run(&g).unwrap().wait().unwrap();
    }

    #[test]
    fn wait_twice_returns_cached_result() {
        let exec = Executor::new(1);
        let mut g = TaskGraph::new("g");
        g.emplace_static(|| {});
        let h = exec.run(&g).unwrap();
        assert_eq!(h.wait(), Ok(()));
        assert_eq!(h.wait(), Ok(()));
    }

    #[test]
    fn callable_panic_surfaces_at_wait() {
        let exec = Executor::new(2);
        let mut g = TaskGraph::new("g");
        let ran_after = Arc::new(AtomicUsize::new(0));
        let bad = g.emplace_static(|| panic!("boom"));
        let after = {
            let ran_after = ran_after.clone();
            g.emplace_static(move || {
                ran_after.fetch_add(1, Ordering::Relaxed);
            })
        };
        g.precede(bad, &[after]).unwrap();
        let err = exec.run(&g).unwrap().wait().unwrap_err();
        assert_eq!(err, RunError::TaskPanicked("boom".to_string()));
        // the failed run drained without running successors
        assert_eq!(ran_after.load(Ordering::Relaxed), 0);
    }

    #[test]
    fn scheduling_foreign_node_is_an_error() {
        let exec = Executor::new(2);
        let mut other = TaskGraph::new("other");
        let foreign = other.emplace_static(|| {});
        let mut g = TaskGraph::new("g");
        let saw_error = Arc::new(AtomicBool::new(false));
        {
            let saw_error = saw_error.clone();
            g.emplace_runtime(move |h| {
                saw_error.store(h.schedule(foreign).is_err(), Ordering::Release);
            });
        }
        exec.run(&g).unwrap().wait().unwrap();
        assert!(saw_error.load(Ordering::Acquire));
    }
}
