//! Execution trace recording and post-hoc validation.
//!
//! When a pipeline is built with tracing enabled, every pipe-callable
//! invocation appends one [`TraceEvent`] carrying the token, line, pipe,
//! begin/end sequence stamps and the worker that ran it. Sequence stamps
//! come from a single atomic counter, so ordering claims are causal and
//! exactly checkable; wall clocks are never consulted. An invocation that
//! requests a stop is abandoned and leaves no event.
//!
//! [`validate`] replays the ordering rules over a finished log;
//! [`simulate_dependencies`] builds the explicit stage-dependency DAG and
//! serves as the independent oracle for the scheduler's join-counter
//! initialization.

mod oracle;
mod validate;

pub use oracle::{expected_events, simulate_dependencies, DependencySim};
pub use validate::{check_stage_overlap, validate, OverlapReport, RuleId, ValidationReport, Violation};

use std::fmt;
use std::io::{self, BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use crossbeam::queue::SegQueue;

use crate::pipeline::PipeType;

/// Worker id recorded when the invocation ran outside an executor worker.
pub const UNKNOWN_WORKER: u32 = u32::MAX;

/// One pipe-callable invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub token: u64,
    pub line: usize,
    pub pipe: usize,
    /// Global sequence stamp taken at callable entry.
    pub begin_seq: u64,
    /// Global sequence stamp taken at callable exit; always > `begin_seq`.
    pub end_seq: u64,
    pub worker: u32,
}

/// A finished run's events plus the pipeline shape they were produced by.
#[derive(Debug, Clone)]
pub struct TraceLog {
    pub num_lines: usize,
    pub pipe_types: Vec<PipeType>,
    /// Tokens admitted by the first pipe over the traced period.
    pub num_tokens: u64,
    pub events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn num_pipes(&self) -> usize {
        self.pipe_types.len()
    }

    /// Write events in the line-delimited text format
    /// `token line pipe begin end worker`.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            writeln!(
                w,
                "{} {} {} {} {} {}",
                e.token, e.line, e.pipe, e.begin_seq, e.end_seq, e.worker
            )?;
        }
        Ok(())
    }
}

/// Error parsing the trace text format.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace line {line}: {reason}")]
pub struct TraceParseError {
    pub line: usize,
    pub reason: String,
}

/// Parse events from the `token line pipe begin end worker` text format.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_trace_text<R: BufRead>(reader: R) -> Result<Vec<TraceEvent>, TraceParseError> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| TraceParseError {
            line: lineno,
            reason: e.to_string(),
        })?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(TraceParseError {
                line: lineno,
                reason: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        fn num<T: std::str::FromStr>(s: &str, lineno: usize) -> Result<T, TraceParseError> {
            s.parse().map_err(|_| TraceParseError {
                line: lineno,
                reason: format!("invalid number `{s}`"),
            })
        }
        events.push(TraceEvent {
            token: num(fields[0], lineno)?,
            line: num(fields[1], lineno)?,
            pipe: num(fields[2], lineno)?,
            begin_seq: num(fields[3], lineno)?,
            end_seq: num(fields[4], lineno)?,
            worker: num(fields[5], lineno)?,
        });
    }
    Ok(events)
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(token {}, line {}, pipe {}, [{}..{}], worker {})",
            self.token, self.line, self.pipe, self.begin_seq, self.end_seq, self.worker
        )
    }
}

/// Concurrent event sink used by instrumented pipelines.
///
/// Appends are lock-free; the log is drained single-threaded after the run.
pub(crate) struct TraceCollector {
    seq: AtomicU64,
    events: SegQueue<TraceEvent>,
}

impl TraceCollector {
    pub(crate) fn new() -> Self {
        TraceCollector {
            seq: AtomicU64::new(0),
            events: SegQueue::new(),
        }
    }

    pub(crate) fn next_seq(&self) -> u64 {
        self.seq.fetch_add(1, Ordering::Relaxed)
    }

    pub(crate) fn record(&self, event: TraceEvent) {
        self.events.push(event);
    }

    pub(crate) fn drain(&self) -> Vec<TraceEvent> {
        let mut out = Vec::new();
        while let Some(e) = self.events.pop() {
            out.push(e);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    #[test]
    fn text_round_trip() {
        let log = TraceLog {
            num_lines: 2,
            pipe_types: vec![PipeType::Serial, PipeType::Parallel],
            num_tokens: 2,
            events: vec![event(0, 0, 0, 0, 1), event(0, 0, 1, 2, 5), event(1, 1, 0, 3, 4)],
        };
        let mut buf = Vec::new();
        log.write_text(&mut buf).unwrap();
        let parsed = parse_trace_text(&buf[..]).unwrap();
        assert_eq!(parsed, log.events);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        let err = parse_trace_text("1 2 3\n".as_bytes()).unwrap_err();
        assert_eq!(err.line, 1);
        let err = parse_trace_text("0 0 0 1 x 0\n".as_bytes()).unwrap_err();
        assert!(err.reason.contains("invalid number"));
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let parsed = parse_trace_text("# header\n\n0 0 0 0 1 7\n".as_bytes()).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].worker, 7);
    }
}
