//! Micro benchmark: pure scheduling over busy-spin stages.
//!
//! Each stage performs a fixed amount of busy work and forwards the token;
//! the first pipe admits tokens until the configured count is reached.

use std::time::Instant;

use pipeweave::pipeline::{Pipe, PipeType, Pipeline};
use pipeweave::runtime::Executor;
use pipeweave::trace::{validate, TraceLog};

use crate::csvout::ResultRow;
use crate::spec::WorkloadSpec;
use crate::util::spin_for_micros;

pub struct MicroOutcome {
    pub rows: Vec<ResultRow>,
    pub all_valid: bool,
    /// Trace of the last run when recording was requested.
    pub last_trace: Option<TraceLog>,
}

fn build_pipes(spec: &WorkloadSpec) -> Vec<Pipe> {
    let cap = spec.tokens;
    let work_us = spec.work_us;
    spec.pipe_types
        .iter()
        .enumerate()
        .map(|(i, &ptype)| {
            if i == 0 {
                Pipe::serial(move |pf| {
                    if pf.token() == cap {
                        pf.stop();
                        return;
                    }
                    spin_for_micros(work_us);
                })
            } else {
                Pipe::new(ptype, move |_pf| spin_for_micros(work_us))
            }
        })
        .collect()
}

/// Run the micro workload `spec.runs` times on a fresh executor.
pub fn run_micro(spec: &WorkloadSpec, record_trace: bool) -> anyhow::Result<MicroOutcome> {
    spec.validate()?;
    let exec = Executor::new(spec.threads);
    let mut rows = Vec::with_capacity(spec.runs);
    let mut all_valid = true;
    let mut last_trace = None;

    for run in 0..spec.runs {
        let pipeline = if record_trace {
            Pipeline::traced(spec.lines, build_pipes(spec))
        } else {
            Pipeline::new(spec.lines, build_pipes(spec))
        }?;

        let start = Instant::now();
        exec.run(pipeline.graph())?.wait()?;
        let wall_ns = start.elapsed().as_nanos();

        let mut valid = true;
        if let Some(log) = pipeline.take_trace() {
            let report = validate(&log);
            if !report.passed() {
                eprintln!("run {run}: {report}");
                valid = false;
                all_valid = false;
            }
            last_trace = Some(log);
        }

        rows.push(ResultRow {
            workload: spec.kind.name(),
            lines: spec.lines,
            pipes: spec.pipe_types.len(),
            tokens: spec.tokens,
            threads: spec.threads,
            run,
            wall_ns,
            tokens_done: pipeline.num_tokens(),
            valid,
            metric: "0".to_string(),
        });
    }

    Ok(MicroOutcome {
        rows,
        all_valid,
        last_trace,
    })
}

/// Wall time of one micro run; used by the overlap measurements.
pub fn time_micro_once(
    lines: usize,
    stages: usize,
    tokens: u64,
    threads: usize,
    work_us: u64,
) -> anyhow::Result<std::time::Duration> {
    let spec = WorkloadSpec {
        kind: crate::spec::WorkloadKind::Micro,
        lines,
        pipe_types: vec![PipeType::Serial; stages],
        tokens,
        threads,
        work_us,
        runs: 1,
        seed: 0,
    };
    let exec = Executor::new(threads);
    let pipeline = Pipeline::new(spec.lines, build_pipes(&spec))?;
    let start = Instant::now();
    exec.run(pipeline.graph())?.wait()?;
    Ok(start.elapsed())
}
