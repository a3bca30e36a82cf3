//! Task graph construction: nodes, edges and composition.
//!
//! A [`TaskGraph`] is built single-threaded through `&mut self` methods and
//! then handed to an [`Executor`](crate::runtime::Executor) for execution.
//! Four node kinds exist:
//!
//! * static tasks — plain callables,
//! * condition tasks — return an index selecting one *weak* successor,
//! * runtime tasks — receive a [`SchedulerHandle`](crate::runtime::SchedulerHandle)
//!   and may schedule peer nodes directly,
//! * module tasks — run another graph to completion before firing their
//!   own successors.
//!
//! Edges out of condition nodes are weak: they do not count toward the
//! target's strong dependency total and only the successor selected by the
//! condition's return value is scheduled.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::RwLock;

use crate::runtime::SchedulerHandle;

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node of a [`TaskGraph`], returned by the `emplace_*` methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaskRef {
    pub(crate) graph: u64,
    pub(crate) index: usize,
}

impl TaskRef {
    /// Position of the node within its graph, in emplacement order.
    pub fn index(&self) -> usize {
        self.index
    }
}

/// The four node kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Static,
    Condition,
    Runtime,
    Module,
}

/// Construction-time errors.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    /// A task reference passed to `precede` belongs to a different graph.
    #[error("task does not belong to graph `{0}`")]
    ForeignTask(String),
    /// The edge is already present; parallel duplicate edges would make the
    /// join-counter bookkeeping ambiguous.
    #[error("duplicate edge {0} -> {1} in graph `{2}`")]
    DuplicateEdge(usize, usize, String),
    /// Composing the graph would create a cycle of module references.
    #[error("composing `{inner}` into `{outer}` would create a module cycle")]
    CompositionCycle { outer: String, inner: String },
}

pub(crate) enum Work {
    Static(Arc<dyn Fn() + Send + Sync>),
    Condition(Arc<dyn Fn() -> usize + Send + Sync>),
    Runtime(Arc<dyn Fn(&SchedulerHandle<'_>) + Send + Sync>),
    Module(Arc<GraphCore>),
}

impl Work {
    pub(crate) fn kind(&self) -> TaskKind {
        match self {
            Work::Static(_) => TaskKind::Static,
            Work::Condition(_) => TaskKind::Condition,
            Work::Runtime(_) => TaskKind::Runtime,
            Work::Module(_) => TaskKind::Module,
        }
    }
}

impl Clone for Work {
    fn clone(&self) -> Self {
        match self {
            Work::Static(f) => Work::Static(f.clone()),
            Work::Condition(f) => Work::Condition(f.clone()),
            Work::Runtime(f) => Work::Runtime(f.clone()),
            Work::Module(g) => Work::Module(g.clone()),
        }
    }
}

pub(crate) struct Node {
    pub(crate) work: Work,
    /// Strong out-edges, in declaration order.
    pub(crate) strong_successors: Vec<usize>,
    /// Weak out-edges (only non-empty for condition nodes); the condition's
    /// return value indexes into this list.
    pub(crate) weak_successors: Vec<usize>,
    /// Number of strong in-edges.
    pub(crate) strong_deps: usize,
    /// Number of weak in-edges; counted only to identify source nodes.
    pub(crate) weak_in: usize,
    /// Countdown of unmet strong dependencies for the current round.
    pub(crate) join: AtomicUsize,
}

pub(crate) struct GraphCore {
    pub(crate) id: u64,
    pub(crate) name: String,
    pub(crate) running: AtomicBool,
    pub(crate) nodes: RwLock<Vec<Node>>,
}

impl GraphCore {
    /// Reset all join counters to their strong dependency totals and return
    /// the source nodes (zero in-edges of any kind).
    pub(crate) fn reset_and_sources(&self) -> Vec<usize> {
        let nodes = self.nodes.read();
        let mut sources = Vec::new();
        for (i, node) in nodes.iter().enumerate() {
            node.join.store(node.strong_deps, Ordering::Release);
            if node.strong_deps == 0 && node.weak_in == 0 {
                sources.push(i);
            }
        }
        sources
    }
}

/// Does `graph` reach a graph with id `target` through module references?
fn reaches(graph: &GraphCore, target: u64) -> bool {
    if graph.id == target {
        return true;
    }
    let nodes = graph.nodes.read();
    nodes.iter().any(|n| match &n.work {
        Work::Module(inner) => reaches(inner, target),
        _ => false,
    })
}

/// A graph of tasks with strong and weak (condition) edges.
///
/// Construction is single-threaded; a graph must not be mutated while it is
/// running (enforced with a runtime assertion).
pub struct TaskGraph {
    pub(crate) core: Arc<GraphCore>,
}

impl TaskGraph {
    pub fn new(name: impl Into<String>) -> Self {
        TaskGraph {
            core: Arc::new(GraphCore {
                id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
                name: name.into(),
                running: AtomicBool::new(false),
                nodes: RwLock::new(Vec::new()),
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.core.name
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.core.nodes.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether the graph is currently executing (directly or as a module).
    pub fn is_running(&self) -> bool {
        self.core.running.load(Ordering::Acquire)
    }

    /// Kind of the node behind `task`, if it belongs to this graph.
    pub fn kind(&self, task: TaskRef) -> Option<TaskKind> {
        if task.graph != self.core.id {
            return None;
        }
        self.core.nodes.read().get(task.index).map(|n| n.work.kind())
    }

    fn assert_not_running(&self) {
        assert!(
            !self.core.running.load(Ordering::Acquire),
            "TaskGraph `{}` mutated while running",
            self.core.name
        );
    }

    fn push_node(&mut self, work: Work) -> TaskRef {
        self.assert_not_running();
        let mut nodes = self.core.nodes.write();
        let index = nodes.len();
        nodes.push(Node {
            work,
            strong_successors: Vec::new(),
            weak_successors: Vec::new(),
            strong_deps: 0,
            weak_in: 0,
            join: AtomicUsize::new(0),
        });
        TaskRef {
            graph: self.core.id,
            index,
        }
    }

    /// Add a static task.
    pub fn emplace_static(&mut self, f: impl Fn() + Send + Sync + 'static) -> TaskRef {
        self.push_node(Work::Static(Arc::new(f)))
    }

    /// Add a condition task. Its return value selects which weak successor
    /// to schedule; an out-of-range index schedules nothing and terminates
    /// that branch.
    pub fn emplace_condition(
        &mut self,
        f: impl Fn() -> usize + Send + Sync + 'static,
    ) -> TaskRef {
        self.push_node(Work::Condition(Arc::new(f)))
    }

    /// Add a runtime task; the callable may schedule nodes of the same graph
    /// through the handle it receives.
    pub fn emplace_runtime(
        &mut self,
        f: impl Fn(&SchedulerHandle<'_>) + Send + Sync + 'static,
    ) -> TaskRef {
        self.push_node(Work::Runtime(Arc::new(f)))
    }

    /// Add a module task that runs `inner` to completion when executed.
    ///
    /// The module keeps a soft reference: `inner` stays owned by the caller
    /// and may be mutated between runs. Two module tasks over the same inner
    /// graph must not run concurrently.
    pub fn composed_of(&mut self, inner: &TaskGraph) -> Result<TaskRef, GraphError> {
        self.assert_not_running();
        if reaches(&inner.core, self.core.id) {
            return Err(GraphError::CompositionCycle {
                outer: self.core.name.clone(),
                inner: inner.core.name.clone(),
            });
        }
        Ok(self.push_node(Work::Module(inner.core.clone())))
    }

    /// Add edges `from -> to` for every `to`, in argument order.
    ///
    /// Edges out of a condition node are weak; all other edges are strong
    /// and increment the target's strong dependency count.
    pub fn precede(&mut self, from: TaskRef, to: &[TaskRef]) -> Result<(), GraphError> {
        self.assert_not_running();
        if from.graph != self.core.id {
            return Err(GraphError::ForeignTask(self.core.name.clone()));
        }
        if to.iter().any(|t| t.graph != self.core.id) {
            return Err(GraphError::ForeignTask(self.core.name.clone()));
        }
        let mut nodes = self.core.nodes.write();
        let weak = nodes[from.index].work.kind() == TaskKind::Condition;
        for t in to {
            let from_node = &nodes[from.index];
            if from_node.strong_successors.contains(&t.index)
                || from_node.weak_successors.contains(&t.index)
            {
                return Err(GraphError::DuplicateEdge(
                    from.index,
                    t.index,
                    self.core.name.clone(),
                ));
            }
            if weak {
                nodes[from.index].weak_successors.push(t.index);
                nodes[t.index].weak_in += 1;
            } else {
                nodes[from.index].strong_successors.push(t.index);
                nodes[t.index].strong_deps += 1;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emplace_adds_nodes_without_edges() {
        let mut g = TaskGraph::new("g");
        let a = g.emplace_static(|| {});
        let b = g.emplace_static(|| {});
        let c = g.emplace_condition(|| 0);
        let d = g.emplace_static(|| {});
        assert_eq!(g.len(), 4);
        assert_eq!(g.kind(a), Some(TaskKind::Static));
        assert_eq!(g.kind(c), Some(TaskKind::Condition));
        let _ = (b, d);
        // no edges yet: everything is a source
        assert_eq!(g.core.reset_and_sources().len(), 4);
    }

    #[test]
    fn single_node_is_a_source() {
        let mut g = TaskGraph::new("g");
        g.emplace_static(|| {});
        assert_eq!(g.core.reset_and_sources(), vec![0]);
    }

    #[test]
    fn condition_edges_are_weak() {
        let mut g = TaskGraph::new("g");
        let init = g.emplace_static(|| {});
        let body = g.emplace_static(|| {});
        let cond = g.emplace_condition(|| 0);
        let done = g.emplace_static(|| {});
        g.precede(init, &[body]).unwrap();
        g.precede(body, &[cond]).unwrap();
        g.precede(cond, &[body, done]).unwrap();

        let nodes = g.core.nodes.read();
        assert_eq!(nodes[cond.index].weak_successors, vec![body.index, done.index]);
        assert!(nodes[cond.index].strong_successors.is_empty());
        // weak edges do not contribute to strong dependency counts
        assert_eq!(nodes[body.index].strong_deps, 1);
        assert_eq!(nodes[done.index].strong_deps, 0);
        drop(nodes);
        // init is the only source
        assert_eq!(g.core.reset_and_sources(), vec![init.index]);
    }

    #[test]
    fn duplicate_edge_is_rejected() {
        let mut g = TaskGraph::new("g");
        let a = g.emplace_static(|| {});
        let b = g.emplace_static(|| {});
        g.precede(a, &[b]).unwrap();
        assert!(matches!(
            g.precede(a, &[b]),
            Err(GraphError::DuplicateEdge(..))
        ));
    }

    #[test]
    fn cross_graph_edge_is_rejected() {
        let mut g1 = TaskGraph::new("g1");
        let mut g2 = TaskGraph::new("g2");
        let a = g1.emplace_static(|| {});
        let b = g2.emplace_static(|| {});
        assert!(matches!(g1.precede(a, &[b]), Err(GraphError::ForeignTask(_))));
    }

    #[test]
    fn composition_cycle_is_rejected() {
        let mut a = TaskGraph::new("a");
        let mut b = TaskGraph::new("b");
        a.composed_of(&b).unwrap();
        assert!(matches!(
            b.composed_of(&a),
            Err(GraphError::CompositionCycle { .. })
        ));
        // longer chains are caught through the module closure
        let mut c = TaskGraph::new("c");
        c.composed_of(&a).unwrap();
        assert!(matches!(
            b.composed_of(&c),
            Err(GraphError::CompositionCycle { .. })
        ));
    }
}
