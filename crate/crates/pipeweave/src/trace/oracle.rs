//! Brute-force oracles for the pipeline scheduler.
//!
//! [`simulate_dependencies`] builds the explicit stage-dependency DAG — a
//! node per (token, pipe), pipe-order edges within a token, and an edge
//! between consecutive tokens at every serial pipe — executes it with a
//! plain topological sweep, and reports the in-degree each (line, pipe)
//! cell sees on its first visit. That in-degree table is the ground truth
//! the scheduler's first-round join-counter initialization is checked
//! against; it is computed from the dependency relation alone and shares no
//! code with the scheduler.

use std::collections::BTreeSet;

use crate::pipeline::PipeType;

/// The complete set of (token, pipe) invocation pairs a run admitting
/// `num_tokens` tokens through `num_pipes` pipes must produce.
pub fn expected_events(num_tokens: u64, num_pipes: usize) -> BTreeSet<(u64, usize)> {
    (0..num_tokens)
        .flat_map(|t| (0..num_pipes).map(move |p| (t, p)))
        .collect()
}

/// Result of the dependency simulation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencySim {
    /// Whether the T-token dependency DAG executed to completion (it always
    /// should; `false` flags an internal inconsistency).
    pub feasible: bool,
    /// `first_round_preds[line][pipe]`: number of dependency-DAG
    /// predecessors of the first token visiting that cell. `None` at
    /// (0, 0), whose task is launched directly rather than counted in.
    pub first_round_preds: Vec<Vec<Option<u64>>>,
}

/// Build and execute the explicit dependency DAG for `num_tokens` tokens
/// over the given pipe types on `num_lines` lines.
///
/// Intended for small instances (the acceptance sweeps stay within
/// `num_lines`, `num_pipes` <= 8 and `num_tokens` <= 64).
pub fn simulate_dependencies(
    num_lines: usize,
    pipe_types: &[PipeType],
    num_tokens: u64,
) -> DependencySim {
    assert!(num_lines >= 1, "need at least one line");
    assert!(!pipe_types.is_empty(), "need at least one pipe");
    let num_pipes = pipe_types.len();

    // Predecessors of node (t, p) under the stage dependency relation:
    //   (t, p-1)  pipe order within a token
    //   (t-1, p)  previous token at a serial pipe
    let preds = |t: u64, p: usize| -> Vec<(u64, usize)> {
        let mut v = Vec::with_capacity(2);
        if p > 0 {
            v.push((t, p - 1));
        }
        if t > 0 && pipe_types[p] == PipeType::Serial {
            v.push((t - 1, p));
        }
        v
    };

    // Feasibility: topologically execute the T-token DAG.
    let total = num_tokens as usize * num_pipes;
    let mut done = vec![false; total];
    let idx = |t: u64, p: usize| t as usize * num_pipes + p;
    let mut executed = 0usize;
    let mut progressed = true;
    while progressed && executed < total {
        progressed = false;
        for t in 0..num_tokens {
            for p in 0..num_pipes {
                if done[idx(t, p)] {
                    continue;
                }
                if preds(t, p).iter().all(|&(pt, pp)| done[idx(pt, pp)]) {
                    done[idx(t, p)] = true;
                    executed += 1;
                    progressed = true;
                }
            }
        }
    }
    let feasible = executed == total;

    // First-round in-degrees: token t = l is the first token on line l, so
    // the first round is exactly tokens 0..num_lines regardless of T.
    let mut first_round_preds = vec![vec![None; num_pipes]; num_lines];
    for (line, row) in first_round_preds.iter_mut().enumerate() {
        for (pipe, slot) in row.iter_mut().enumerate() {
            if line == 0 && pipe == 0 {
                continue;
            }
            *slot = Some(preds(line as u64, pipe).len() as u64);
        }
    }

    DependencySim {
        feasible,
        first_round_preds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PipeType::{Parallel as P, Serial as S};

    #[test]
    fn expected_events_grid() {
        assert!(expected_events(0, 3).is_empty());
        assert_eq!(expected_events(4, 3).len(), 12);
        let grid = expected_events(8, 3);
        assert_eq!(grid.len(), 24);
        assert!(grid.contains(&(7, 2)));
        assert!(!grid.contains(&(8, 0)));
    }

    #[test]
    fn serial_parallel_serial_first_round_counts() {
        let sim = simulate_dependencies(4, &[S, P, S], 8);
        assert!(sim.feasible);
        // row 0: [-, 1, 1]; rows 1-3: [1, 1, 2]
        assert_eq!(sim.first_round_preds[0], vec![None, Some(1), Some(1)]);
        for line in 1..4 {
            assert_eq!(
                sim.first_round_preds[line],
                vec![Some(1), Some(1), Some(2)]
            );
        }
    }

    #[test]
    fn single_serial_pipe_two_lines() {
        let sim = simulate_dependencies(2, &[S], 8);
        assert!(sim.feasible);
        assert_eq!(sim.first_round_preds[0], vec![None]);
        assert_eq!(sim.first_round_preds[1], vec![Some(1)]);
    }

    #[test]
    fn all_parallel_after_first_pipe() {
        for lines in 1..=4 {
            let sim = simulate_dependencies(lines, &[S, P, P, P], 16);
            assert!(sim.feasible);
            for line in 0..lines {
                for pipe in 1..4 {
                    assert_eq!(sim.first_round_preds[line][pipe], Some(1));
                }
            }
        }
    }

    #[test]
    fn zero_tokens_is_feasible() {
        let sim = simulate_dependencies(3, &[S, S], 0);
        assert!(sim.feasible);
    }
}
