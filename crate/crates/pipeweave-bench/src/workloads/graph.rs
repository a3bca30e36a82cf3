//! Levelized-graph propagation workload.
//!
//! A random DAG is levelized (edges only between consecutive levels); each
//! node carries a small square state matrix. Tokens sweep the nodes in
//! level order through `P` serial stages, and stage `p` multiplies the
//! node's state by a stage-specific constant matrix. The final checksum
//! over all node states is independent of thread count and equals a plain
//! sequential pass, which serves as the oracle.

use std::sync::{Arc, Mutex};
use std::time::Instant;

use pipeweave::pipeline::{Pipe, Pipeline};
use pipeweave::runtime::Executor;
use pipeweave::trace::validate;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::csvout::ResultRow;
use crate::spec::WorkloadSpec;
use crate::util::spin_for_micros;

#[derive(Debug, Clone)]
pub struct GraphConfig {
    pub spec: WorkloadSpec,
    pub nodes: usize,
    pub levels: usize,
    pub matrix_dim: usize,
}

pub struct GraphOutcome {
    pub rows: Vec<ResultRow>,
    pub all_valid: bool,
    /// Checksum per run; identical across runs and thread counts.
    pub checksums: Vec<f64>,
}

/// Generated instance: level structure, per-node initial state, and one
/// constant matrix per stage.
pub struct LevelizedGraph {
    pub level_of: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    /// Node ids sorted by level; token i processes level_order[i].
    pub level_order: Vec<usize>,
    pub init_states: Vec<Vec<f64>>,
    pub stage_matrices: Vec<Vec<f64>>,
    pub matrix_dim: usize,
}

pub fn generate_graph(
    seed: u64,
    nodes: usize,
    levels: usize,
    matrix_dim: usize,
    stages: usize,
) -> LevelizedGraph {
    assert!(nodes >= levels && levels >= 1, "need nodes >= levels >= 1");
    let mut rng = StdRng::seed_from_u64(seed);

    // Every level gets one node, the rest land uniformly.
    let mut level_of = vec![0usize; nodes];
    for (node, level) in level_of.iter_mut().enumerate().take(levels) {
        *level = node;
    }
    for level in level_of.iter_mut().skip(levels) {
        *level = rng.gen_range(0..levels);
    }

    let mut level_order: Vec<usize> = (0..nodes).collect();
    level_order.sort_by_key(|&n| (level_of[n], n));

    let mut nodes_at = vec![Vec::new(); levels];
    for (node, &level) in level_of.iter().enumerate() {
        nodes_at[level].push(node);
    }
    let mut edges = Vec::new();
    for node in 0..nodes {
        let level = level_of[node];
        if level == 0 {
            continue;
        }
        let parents = &nodes_at[level - 1];
        let fanin = rng.gen_range(1..=3.min(parents.len()));
        for _ in 0..fanin {
            let p = parents[rng.gen_range(0..parents.len())];
            edges.push((p, node));
        }
    }

    let init_states = (0..nodes)
        .map(|_| {
            (0..matrix_dim * matrix_dim)
                .map(|_| rng.gen_range(0.5..1.5))
                .collect()
        })
        .collect();

    // Near-identity stage matrices keep state magnitudes stable over long
    // stage chains.
    let stage_matrices = (0..stages)
        .map(|_| {
            let mut m = vec![0.0f64; matrix_dim * matrix_dim];
            for i in 0..matrix_dim {
                for j in 0..matrix_dim {
                    m[i * matrix_dim + j] = if i == j {
                        1.0 + rng.gen_range(-0.05..0.05)
                    } else {
                        rng.gen_range(-0.01..0.01)
                    };
                }
            }
            m
        })
        .collect();

    LevelizedGraph {
        level_of,
        edges,
        level_order,
        init_states,
        stage_matrices,
        matrix_dim,
    }
}

fn mat_mul(a: &[f64], b: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            for j in 0..dim {
                out[i * dim + j] += aik * b[k * dim + j];
            }
        }
    }
    out
}

fn checksum(states: &[Vec<f64>]) -> f64 {
    // Fixed summation order: node id, then entry index.
    states.iter().flat_map(|m| m.iter()).sum()
}

/// Sequential reference pass: apply every stage matrix to every node without
/// any pipeline involvement.
pub fn sequential_checksum(
    seed: u64,
    nodes: usize,
    levels: usize,
    matrix_dim: usize,
    stages: usize,
) -> f64 {
    let g = generate_graph(seed, nodes, levels, matrix_dim, stages);
    let mut states = g.init_states.clone();
    for &node in &g.level_order {
        for stage in &g.stage_matrices {
            states[node] = mat_mul(&states[node], stage, matrix_dim);
        }
    }
    checksum(&states)
}

/// Run the propagation through the pipeline `spec.runs` times.
pub fn run_graph(cfg: &GraphConfig, record_trace: bool) -> anyhow::Result<GraphOutcome> {
    cfg.spec.validate()?;
    anyhow::ensure!(
        cfg.nodes >= cfg.levels && cfg.levels >= 1,
        "graph workload needs nodes >= levels >= 1"
    );
    let stages = cfg.spec.pipe_types.len();
    let exec = Executor::new(cfg.spec.threads);
    let mut rows = Vec::with_capacity(cfg.spec.runs);
    let mut checksums = Vec::with_capacity(cfg.spec.runs);
    let mut all_valid = true;

    for run in 0..cfg.spec.runs {
        let g = Arc::new(generate_graph(
            cfg.spec.seed,
            cfg.nodes,
            cfg.levels,
            cfg.matrix_dim,
            stages,
        ));
        let states: Arc<Vec<Mutex<Vec<f64>>>> = Arc::new(
            g.init_states
                .iter()
                .map(|m| Mutex::new(m.clone()))
                .collect(),
        );

        let token_cap = cfg.nodes as u64;
        let work_us = cfg.spec.work_us;
        let pipes: Vec<Pipe> = (0..stages)
            .map(|stage| {
                let g = g.clone();
                let states = states.clone();
                Pipe::serial(move |pf| {
                    let token = pf.token();
                    if stage == 0 && token == token_cap {
                        pf.stop();
                        return;
                    }
                    let node = g.level_order[token as usize];
                    let mut state = states[node].lock().unwrap();
                    *state = mat_mul(&state, &g.stage_matrices[stage], g.matrix_dim);
                    drop(state);
                    spin_for_micros(work_us);
                })
            })
            .collect();

        let pipeline = if record_trace {
            Pipeline::traced(cfg.spec.lines, pipes)
        } else {
            Pipeline::new(cfg.spec.lines, pipes)
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
        }

        let final_states: Vec<Vec<f64>> =
            states.iter().map(|m| m.lock().unwrap().clone()).collect();
        let sum = checksum(&final_states);
        checksums.push(sum);

        rows.push(ResultRow {
            workload: cfg.spec.kind.name(),
            lines: cfg.spec.lines,
            pipes: stages,
            tokens: token_cap,
            threads: cfg.spec.threads,
            run,
            wall_ns,
            tokens_done: pipeline.num_tokens(),
            valid,
            metric: format!("{sum}"),
        });
    }

    Ok(GraphOutcome {
        rows,
        all_valid,
        checksums,
    })
}
