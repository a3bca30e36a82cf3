//! Rule checks over a finished trace.
//!
//! Rules, in check order:
//!
//! 1. exactly-once: no (token, pipe) pair appears twice;
//! 2. completeness: every admitted token passed every pipe, and no event
//!    belongs to an unadmitted token;
//! 3. pipe order: a token finishes pipe `p` before it begins pipe `p+1`;
//! 4. serial order: consecutive tokens never overlap at a serial pipe;
//! 5. line mapping: every event's line equals `token % num_lines`;
//! 6. line disjointness: events on one line never interleave.
//!
//! Violations are data, not errors; the validator is deterministic — the
//! same log always yields the same report.

use std::collections::BTreeMap;
use std::fmt;

use crate::pipeline::PipeType;
use crate::trace::{expected_events, TraceEvent, TraceLog};

/// Identifier of a validation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleId {
    /// Sequence stamps malformed (begin >= end, or reused).
    Malformed,
    /// Rule 1: one invocation per (token, pipe).
    ExactlyOnce,
    /// Rule 2: all admitted (token, pipe) pairs present, nothing extra.
    Completeness,
    /// Rule 3: within a token, pipes execute in order.
    PipeOrder,
    /// Rule 4: consecutive tokens execute a serial pipe in token order.
    SerialOrder,
    /// Rule 5: line equals token modulo line count.
    LineMapping,
    /// Rule 6: per-line event intervals are totally ordered.
    LineOverlap,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RuleId::Malformed => "malformed",
            RuleId::ExactlyOnce => "exactly-once",
            RuleId::Completeness => "completeness",
            RuleId::PipeOrder => "pipe-order",
            RuleId::SerialOrder => "serial-order",
            RuleId::LineMapping => "line-mapping",
            RuleId::LineOverlap => "line-overlap",
        };
        f.write_str(name)
    }
}

/// One rule violation with the offending events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: RuleId,
    pub message: String,
    pub events: Vec<TraceEvent>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule, self.message)
    }
}

/// Outcome of [`validate`]; passes iff no violations were found.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "trace valid")
        } else {
            writeln!(f, "trace INVALID: {} violation(s)", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  {v}")?;
            }
            Ok(())
        }
    }
}

/// Check a finished run's trace against rules 1-6.
pub fn validate(log: &TraceLog) -> ValidationReport {
    let mut violations = Vec::new();
    let num_pipes = log.num_pipes();

    // Sequence sanity first; later rules rely on the stamps.
    let mut seqs: Vec<u64> = Vec::with_capacity(log.events.len() * 2);
    for e in &log.events {
        if e.begin_seq >= e.end_seq {
            violations.push(Violation {
                rule: RuleId::Malformed,
                message: format!("event {e} has begin >= end"),
                events: vec![*e],
            });
        }
        seqs.push(e.begin_seq);
        seqs.push(e.end_seq);
    }
    seqs.sort_unstable();
    if seqs.windows(2).any(|w| w[0] == w[1]) {
        violations.push(Violation {
            rule: RuleId::Malformed,
            message: "sequence stamps are not globally unique".to_string(),
            events: Vec::new(),
        });
    }

    // Rule 1: exactly once per (token, pipe).
    let mut by_pair: BTreeMap<(u64, usize), Vec<&TraceEvent>> = BTreeMap::new();
    for e in &log.events {
        by_pair.entry((e.token, e.pipe)).or_default().push(e);
    }
    for ((token, pipe), events) in &by_pair {
        if events.len() > 1 {
            violations.push(Violation {
                rule: RuleId::ExactlyOnce,
                message: format!(
                    "token {token} pipe {pipe} was invoked {} times",
                    events.len()
                ),
                events: events.iter().map(|e| **e).collect(),
            });
        }
    }

    // Rule 2: completeness against the admitted-token grid.
    for (token, pipe) in expected_events(log.num_tokens, num_pipes) {
        if !by_pair.contains_key(&(token, pipe)) {
            violations.push(Violation {
                rule: RuleId::Completeness,
                message: format!("missing invocation of token {token} at pipe {pipe}"),
                events: Vec::new(),
            });
        }
    }
    for ((token, pipe), events) in &by_pair {
        if *token >= log.num_tokens || *pipe >= num_pipes {
            violations.push(Violation {
                rule: RuleId::Completeness,
                message: format!(
                    "event for token {token} pipe {pipe} outside the admitted grid"
                ),
                events: events.iter().map(|e| **e).collect(),
            });
        }
    }

    let first = |token: u64, pipe: usize| -> Option<&TraceEvent> {
        by_pair.get(&(token, pipe)).map(|v| v[0])
    };

    // Rule 3: pipe order within each token.
    for token in 0..log.num_tokens {
        for pipe in 0..num_pipes.saturating_sub(1) {
            if let (Some(a), Some(b)) = (first(token, pipe), first(token, pipe + 1)) {
                if a.end_seq >= b.begin_seq {
                    violations.push(Violation {
                        rule: RuleId::PipeOrder,
                        message: format!(
                            "token {token}: pipe {} began before pipe {pipe} ended",
                            pipe + 1
                        ),
                        events: vec![*a, *b],
                    });
                }
            }
        }
    }

    // Rule 4: serial pipes run consecutive tokens in order.
    for (pipe, ptype) in log.pipe_types.iter().enumerate() {
        if *ptype != PipeType::Serial {
            continue;
        }
        for token in 1..log.num_tokens {
            if let (Some(prev), Some(curr)) = (first(token - 1, pipe), first(token, pipe)) {
                if prev.end_seq >= curr.begin_seq {
                    violations.push(Violation {
                        rule: RuleId::SerialOrder,
                        message: format!(
                            "serial pipe {pipe}: token {token} began before token {} ended",
                            token - 1
                        ),
                        events: vec![*prev, *curr],
                    });
                }
            }
        }
    }

    // Rule 5: line assignment.
    for e in &log.events {
        let expected = (e.token % log.num_lines as u64) as usize;
        if e.line != expected {
            violations.push(Violation {
                rule: RuleId::LineMapping,
                message: format!("event {e} expected on line {expected}"),
                events: vec![*e],
            });
        }
    }

    // Rule 6: intervals on one line never interleave.
    let mut by_line: BTreeMap<usize, Vec<&TraceEvent>> = BTreeMap::new();
    for e in &log.events {
        by_line.entry(e.line).or_default().push(e);
    }
    for (line, events) in &mut by_line {
        events.sort_by_key(|e| e.begin_seq);
        for pair in events.windows(2) {
            if pair[0].end_seq >= pair[1].begin_seq {
                violations.push(Violation {
                    rule: RuleId::LineOverlap,
                    message: format!("line {line} carries two interleaved invocations"),
                    events: vec![*pair[0], *pair[1]],
                });
            }
        }
    }

    ValidationReport { violations }
}

/// Outcome of [`check_stage_overlap`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapReport {
    /// Forbidden orderings: overlapping invocations at a serial pipe.
    pub violations: Vec<Violation>,
    /// Observed overlapping pairs at parallel pipes; diagnostic only — a
    /// single-worker run legitimately observes zero.
    pub parallel_overlap_pairs: u64,
}

impl OverlapReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verify stage types against observed concurrency: serial pipes must show
/// no overlap at all; parallel pipes may overlap but are not required to.
pub fn check_stage_overlap(log: &TraceLog) -> OverlapReport {
    let mut violations = Vec::new();
    let mut parallel_overlap_pairs = 0u64;

    for (pipe, ptype) in log.pipe_types.iter().enumerate() {
        let mut events: Vec<&TraceEvent> =
            log.events.iter().filter(|e| e.pipe == pipe).collect();
        events.sort_by_key(|e| e.begin_seq);
        // Sweep over begin-ordered events; overlaps are pairs where the
        // earlier interval is still open.
        let mut open: Vec<&TraceEvent> = Vec::new();
        for e in events {
            open.retain(|o| o.end_seq > e.begin_seq);
            match ptype {
                PipeType::Serial => {
                    for o in &open {
                        violations.push(Violation {
                            rule: RuleId::SerialOrder,
                            message: format!("serial pipe {pipe}: overlapping invocations"),
                            events: vec![**o, *e],
                        });
                    }
                }
                PipeType::Parallel => {
                    parallel_overlap_pairs += open.len() as u64;
                }
            }
            open.push(e);
        }
    }

    OverlapReport {
        violations,
        parallel_overlap_pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PipeType::{Parallel, Serial};

    fn event(token: u64, line: usize, pipe: usize, begin: u64, end: u64) -> TraceEvent {
        TraceEvent {
            token,
            line,
            pipe,
            begin_seq: begin,
            end_seq: end,
            worker: 0,
        }
    }

    /// Hand-built valid trace: L=2, P=2 [S,S], T=2, fully sequential.
    fn valid_log() -> TraceLog {
        TraceLog {
            num_lines: 2,
            pipe_types: vec![Serial, Serial],
            num_tokens: 2,
            events: vec![
                event(0, 0, 0, 0, 1),
                event(0, 0, 1, 2, 3),
                event(1, 1, 0, 4, 5),
                event(1, 1, 1, 6, 7),
            ],
        }
    }

    #[test]
    fn valid_trace_passes() {
        let report = validate(&valid_log());
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn duplicated_event_violates_exactly_once() {
        let mut log = valid_log();
        log.events.push(event(1, 1, 1, 8, 9));
        let report = validate(&log);
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == RuleId::ExactlyOnce));
    }

    #[test]
    fn missing_pair_violates_completeness() {
        let mut log = valid_log();
        log.events.pop();
        let report = validate(&log);
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == RuleId::Completeness));
    }

    #[test]
    fn serial_order_violation_is_detected() {
        let mut log = valid_log();
        // token 1 begins pipe 0 before token 0 ends it
        log.events[2].begin_seq = 0;
        log.events[0].begin_seq = 10;
        log.events[0].end_seq = 11;
        log.events[1].begin_seq = 12;
        log.events[1].end_seq = 13;
        let report = validate(&log);
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == RuleId::SerialOrder));
    }

    #[test]
    fn wrong_line_violates_mapping() {
        let mut log = valid_log();
        log.events[2].line = 0;
        let report = validate(&log);
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == RuleId::LineMapping));
        // the misplaced event now also interleaves line 0
        assert!(!report.passed());
    }

    #[test]
    fn validator_is_deterministic() {
        let mut log = valid_log();
        log.events.push(event(0, 0, 1, 100, 101));
        let a = validate(&log);
        let b = validate(&log);
        assert_eq!(a, b);
    }

    #[test]
    fn overlap_check_requires_nothing_for_single_worker_runs() {
        let log = TraceLog {
            num_lines: 2,
            pipe_types: vec![Serial, Parallel],
            num_tokens: 2,
            events: vec![
                event(0, 0, 0, 0, 1),
                event(0, 0, 1, 2, 3),
                event(1, 1, 0, 4, 5),
                event(1, 1, 1, 6, 7),
            ],
        };
        let report = check_stage_overlap(&log);
        assert!(report.passed());
        assert_eq!(report.parallel_overlap_pairs, 0);
    }

    #[test]
    fn overlap_at_parallel_pipe_is_diagnostic_only() {
        let log = TraceLog {
            num_lines: 2,
            pipe_types: vec![Serial, Parallel],
            num_tokens: 2,
            events: vec![
                event(0, 0, 0, 0, 1),
                event(1, 1, 0, 2, 3),
                event(0, 0, 1, 4, 7),
                event(1, 1, 1, 5, 6),
            ],
        };
        let report = check_stage_overlap(&log);
        assert!(report.passed());
        assert_eq!(report.parallel_overlap_pairs, 1);
    }

    #[test]
    fn overlap_at_serial_pipe_is_a_violation() {
        let log = TraceLog {
            num_lines: 2,
            pipe_types: vec![Serial, Serial],
            num_tokens: 2,
            events: vec![
                event(0, 0, 0, 0, 3),
                event(1, 1, 0, 1, 2),
                event(0, 0, 1, 4, 5),
                event(1, 1, 1, 6, 7),
            ],
        };
        let report = check_stage_overlap(&log);
        assert!(!report.passed());
    }
}
