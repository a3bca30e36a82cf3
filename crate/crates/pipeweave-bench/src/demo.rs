//! Iterative-streaming demo: a pipeline module rerun by a condition task.
//!
//! Graph: head -> pipeline module -> cond -> {pipeline module, done}. The
//! data source replenishes a fixed token budget each pass; the condition
//! task reruns the pipeline until the requested number of passes is done.
//! Every rerun resumes where the last stop left off (first pipe picks up
//! the next unadmitted token on line `num_tokens % L`).

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use pipeweave::pipeline::{Pipe, Pipeline};
use pipeweave::runtime::{Executor, TaskGraph};
use pipeweave::trace::validate;

use crate::spec::WorkloadSpec;

pub struct DemoOutcome {
    /// Tokens admitted over all passes.
    pub total_tokens: u64,
    /// What the sequential replay of the stop predicate admits.
    pub expected_tokens: u64,
    /// (first token of each pass, line it resumed on).
    pub resumptions: Vec<(u64, usize)>,
    pub valid: bool,
}

/// Run `passes` pipeline executions of `spec.tokens` tokens each (at least
/// one pass) and check the cumulative result against the sequential replay.
pub fn run_demo(spec: &WorkloadSpec, passes: usize) -> anyhow::Result<DemoOutcome> {
    spec.validate()?;
    let passes = passes.max(1) as u64;
    let per_pass = spec.tokens;
    let expected_tokens = passes * per_pass;

    let budget = Arc::new(AtomicU64::new(per_pass));
    let mut pipes = vec![{
        let budget = budget.clone();
        Pipe::serial(move |pf| {
            if pf.token() == budget.load(Ordering::Acquire) {
                pf.stop();
            }
        })
    }];
    for &ptype in &spec.pipe_types[1..] {
        pipes.push(Pipe::new(ptype, |_| {}));
    }
    let pipeline = Pipeline::traced(spec.lines, pipes)?;

    let mut graph = TaskGraph::new("demo-iterative");
    let head = graph.emplace_static(|| {});
    let module = graph.composed_of(pipeline.graph())?;
    let passes_done = Arc::new(AtomicU64::new(0));
    let cond = {
        let passes_done = passes_done.clone();
        let budget = budget.clone();
        graph.emplace_condition(move || {
            let done = passes_done.fetch_add(1, Ordering::AcqRel) + 1;
            if done < passes {
                budget.fetch_add(per_pass, Ordering::AcqRel);
                0
            } else {
                1
            }
        })
    };
    let done = graph.emplace_static(|| {});
    graph.precede(head, &[module])?;
    graph.precede(module, &[cond])?;
    graph.precede(cond, &[module, done])?;

    let exec = Executor::new(spec.threads);
    exec.run(&graph)?.wait()?;

    let total_tokens = pipeline.num_tokens();
    let log = pipeline.take_trace().expect("demo pipeline is traced");
    let report = validate(&log);
    let mut valid = report.passed();
    if !valid {
        eprintln!("{report}");
    }
    valid &= total_tokens == expected_tokens;

    // Where each pass resumed: the first admitted token of pass i is
    // i * per_pass and must sit on line (i * per_pass) % L.
    let mut resumptions = Vec::new();
    for pass in 0..passes {
        let first_token = pass * per_pass;
        if first_token >= total_tokens {
            break;
        }
        match log
            .events
            .iter()
            .find(|e| e.token == first_token && e.pipe == 0)
        {
            Some(e) => {
                resumptions.push((first_token, e.line));
                valid &= e.line as u64 == first_token % spec.lines as u64;
            }
            None => valid = false,
        }
    }

    Ok(DemoOutcome {
        total_tokens,
        expected_tokens,
        resumptions,
        valid,
    })
}
