//! Detailed-placement local reordering workload.
//!
//! A grid of `R` rows by `C` windows, four cells per window, connected by
//! horizontal chain nets within a row and vertical nets between adjacent
//! rows. Stage `r` of the pipeline reorders row `r`'s current window by
//! brute-forcing all 4! cell-to-slot assignments and keeping the best
//! total wirelength over the nets it touches; tokens sweep window columns
//! left to right.
//!
//! Rows are serial stages: window `c` of a row must finish before window
//! `c+1` of the same row (left-to-right sweep) and before window `c` of the
//! row below (vertical nets). Cells right of the active window are read at
//! their current positions and treated as fixed, which is what makes the
//! row-major sequential pass bit-identical to any pipeline interleaving.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use itertools::Itertools;
use pipeweave::pipeline::{Pipe, Pipeline};
use pipeweave::runtime::Executor;
use pipeweave::trace::validate;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::csvout::ResultRow;
use crate::spec::WorkloadSpec;

pub const CELLS_PER_WINDOW: usize = 4;

#[derive(Debug, Clone)]
pub struct PlaceConfig {
    pub spec: WorkloadSpec,
    pub rows: usize,
    pub cols: usize,
}

pub struct PlaceOutcome {
    pub rows: Vec<ResultRow>,
    pub all_valid: bool,
    pub initial_wirelength: u64,
    /// Final wirelength per run; identical across runs and thread counts.
    pub final_wirelengths: Vec<u64>,
}

/// Cell positions plus the nets over them. `x` coordinates are the only
/// mutable state; rows are fixed at `y = row`.
pub struct PlacementGrid {
    pub rows: usize,
    pub cols: usize,
    xs: Vec<AtomicI64>,
    ys: Vec<i64>,
    nets: Vec<(usize, usize)>,
    /// Net indices touching each window, indexed by `row * cols + col`.
    window_nets: Vec<Vec<usize>>,
}

impl PlacementGrid {
    fn cell(&self, row: usize, col: usize, k: usize) -> usize {
        (row * self.cols + col) * CELLS_PER_WINDOW + k
    }

    pub fn total_wirelength(&self) -> u64 {
        self.nets
            .iter()
            .map(|&(a, b)| {
                let dx = (self.xs[a].load(Ordering::Acquire)
                    - self.xs[b].load(Ordering::Acquire))
                .unsigned_abs();
                let dy = (self.ys[a] - self.ys[b]).unsigned_abs();
                dx + dy
            })
            .sum()
    }
}

pub fn generate_grid(seed: u64, rows: usize, cols: usize) -> PlacementGrid {
    assert!(rows >= 1 && cols >= 1);
    let mut rng = StdRng::seed_from_u64(seed);
    let num_cells = rows * cols * CELLS_PER_WINDOW;
    let mut xs = Vec::with_capacity(num_cells);
    let mut ys = Vec::with_capacity(num_cells);

    // Each window owns four consecutive unit slots; cells start on a random
    // permutation of their window's slots.
    for row in 0..rows {
        for col in 0..cols {
            let mut slots = [0i64; CELLS_PER_WINDOW];
            for (k, slot) in slots.iter_mut().enumerate() {
                *slot = (col * CELLS_PER_WINDOW + k) as i64;
            }
            let mut perm: Vec<usize> = (0..CELLS_PER_WINDOW).collect();
            perm.shuffle(&mut rng);
            for k in 0..CELLS_PER_WINDOW {
                xs.push(AtomicI64::new(slots[perm[k]]));
                ys.push(row as i64);
            }
        }
    }

    let grid_shape = |row: usize, col: usize, k: usize| {
        (row * cols + col) * CELLS_PER_WINDOW + k
    };
    let mut nets = Vec::new();
    for row in 0..rows {
        // horizontal chain along the row, crossing window boundaries
        for col in 0..cols {
            for k in 0..CELLS_PER_WINDOW - 1 {
                nets.push((grid_shape(row, col, k), grid_shape(row, col, k + 1)));
            }
            if col + 1 < cols {
                nets.push((
                    grid_shape(row, col, CELLS_PER_WINDOW - 1),
                    grid_shape(row, col + 1, 0),
                ));
            }
        }
        // vertical nets to the next row, same window column
        if row + 1 < rows {
            for col in 0..cols {
                for k in 0..CELLS_PER_WINDOW {
                    if rng.gen_bool(0.5) {
                        nets.push((grid_shape(row, col, k), grid_shape(row + 1, col, k)));
                    }
                }
            }
        }
    }

    let mut window_nets = vec![Vec::new(); rows * cols];
    for (i, &(a, b)) in nets.iter().enumerate() {
        let wa = a / CELLS_PER_WINDOW;
        let wb = b / CELLS_PER_WINDOW;
        window_nets[wa].push(i);
        if wb != wa {
            window_nets[wb].push(i);
        }
    }

    PlacementGrid {
        rows,
        cols,
        xs,
        ys,
        nets,
        window_nets,
    }
}

/// Brute-force the best ordering of the four cells in window (row, col).
///
/// All 24 assignments are evaluated in a fixed enumeration order and the
/// current assignment is kept unless strictly improved, so ties never move
/// cells and every schedule makes identical decisions.
pub fn reorder_window(grid: &PlacementGrid, row: usize, col: usize) {
    let cells: Vec<usize> = (0..CELLS_PER_WINDOW).map(|k| grid.cell(row, col, k)).collect();
    let mut slots: Vec<i64> = cells
        .iter()
        .map(|&c| grid.xs[c].load(Ordering::Acquire))
        .collect();
    slots.sort_unstable();

    let cost_with = |assignment: &[i64]| -> u64 {
        let pos = |cell: usize| -> i64 {
            match cells.iter().position(|&c| c == cell) {
                Some(k) => assignment[k],
                None => grid.xs[cell].load(Ordering::Acquire),
            }
        };
        grid.window_nets[row * grid.cols + col]
            .iter()
            .map(|&n| {
                let (a, b) = grid.nets[n];
                let dx = (pos(a) - pos(b)).unsigned_abs();
                let dy = (grid.ys[a] - grid.ys[b]).unsigned_abs();
                dx + dy
            })
            .sum()
    };

    let current: Vec<i64> = cells
        .iter()
        .map(|&c| grid.xs[c].load(Ordering::Acquire))
        .collect();
    let mut best_cost = cost_with(&current);
    let mut best: Option<Vec<i64>> = None;
    for perm in (0..CELLS_PER_WINDOW).permutations(CELLS_PER_WINDOW) {
        let assignment: Vec<i64> = perm.iter().map(|&i| slots[i]).collect();
        let cost = cost_with(&assignment);
        if cost < best_cost {
            best_cost = cost;
            best = Some(assignment);
        }
    }
    if let Some(assignment) = best {
        for (k, &cell) in cells.iter().enumerate() {
            grid.xs[cell].store(assignment[k], Ordering::Release);
        }
    }
}

/// Row-major sequential reference pass; returns (initial, final) wirelength.
pub fn sequential_wirelength(seed: u64, rows: usize, cols: usize) -> (u64, u64) {
    let grid = generate_grid(seed, rows, cols);
    let initial = grid.total_wirelength();
    for row in 0..rows {
        for col in 0..cols {
            reorder_window(&grid, row, col);
        }
    }
    (initial, grid.total_wirelength())
}

/// Run the reordering through the pipeline `spec.runs` times: one serial
/// stage per row, tokens are window columns.
pub fn run_place(cfg: &PlaceConfig, record_trace: bool) -> anyhow::Result<PlaceOutcome> {
    cfg.spec.validate()?;
    anyhow::ensure!(cfg.rows >= 1 && cfg.cols >= 1, "need rows >= 1 and cols >= 1");
    let exec = Executor::new(cfg.spec.threads);
    let mut rows_out = Vec::with_capacity(cfg.spec.runs);
    let mut final_wirelengths = Vec::with_capacity(cfg.spec.runs);
    let mut all_valid = true;
    let mut initial_wirelength = 0;

    for run in 0..cfg.spec.runs {
        let grid = Arc::new(generate_grid(cfg.spec.seed, cfg.rows, cfg.cols));
        initial_wirelength = grid.total_wirelength();

        let token_cap = cfg.cols as u64;
        let pipes: Vec<Pipe> = (0..cfg.rows)
            .map(|row| {
                let grid = grid.clone();
                Pipe::serial(move |pf| {
                    let token = pf.token();
                    if row == 0 && token == token_cap {
                        pf.stop();
                        return;
                    }
                    reorder_window(&grid, row, token as usize);
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

        let final_wl = grid.total_wirelength();
        final_wirelengths.push(final_wl);

        rows_out.push(ResultRow {
            workload: cfg.spec.kind.name(),
            lines: cfg.spec.lines,
            pipes: cfg.rows,
            tokens: token_cap,
            threads: cfg.spec.threads,
            run,
            wall_ns,
            tokens_done: pipeline.num_tokens(),
            valid,
            metric: final_wl.to_string(),
        });
    }

    Ok(PlaceOutcome {
        rows: rows_out,
        all_valid,
        initial_wirelength,
        final_wirelengths,
    })
}
