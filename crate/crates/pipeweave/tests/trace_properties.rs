//! Property tests: randomized pipeline shapes always produce valid traces,
//! and the trace text format round-trips.

use proptest::prelude::*;

use pipeweave::pipeline::{Pipe, PipeType, Pipeline};
use pipeweave::runtime::Executor;
use pipeweave::trace::{parse_trace_text, validate, TraceEvent, TraceLog};

fn arb_event() -> impl Strategy<Value = TraceEvent> {
    (
        0u64..1000,
        0usize..64,
        0usize..64,
        0u64..100_000,
        0u64..100_000,
        0u32..16,
    )
        .prop_map(|(token, line, pipe, a, b, worker)| TraceEvent {
            token,
            line,
            pipe,
            begin_seq: a.min(b),
            end_seq: a.max(b) + 1,
            worker,
        })
}

fn arb_types() -> impl Strategy<Value = Vec<PipeType>> {
    proptest::collection::vec(
        prop_oneof![Just(PipeType::Serial), Just(PipeType::Parallel)],
        0..4,
    )
    .prop_map(|mut tail| {
        let mut types = vec![PipeType::Serial];
        types.append(&mut tail);
        types
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_text_round_trips(events in proptest::collection::vec(arb_event(), 0..50)) {
        let log = TraceLog {
            num_lines: 4,
            pipe_types: vec![PipeType::Serial],
            num_tokens: 0,
            events,
        };
        let mut buf = Vec::new();
        log.write_text(&mut buf).unwrap();
        let parsed = parse_trace_text(&buf[..]).unwrap();
        prop_assert_eq!(parsed, log.events);
    }

    #[test]
    fn random_shapes_produce_valid_traces(
        lines in 1usize..=5,
        types in arb_types(),
        tokens in 0u64..=20,
        workers in 1usize..=4,
    ) {
        let mut pipes: Vec<Pipe> = vec![Pipe::serial(move |pf| {
            if pf.token() == tokens {
                pf.stop();
            }
        })];
        for &t in &types[1..] {
            pipes.push(Pipe::new(t, |_| {}));
        }
        let pl = Pipeline::traced(lines, pipes).unwrap();
        let exec = Executor::new(workers);
        exec.run(pl.graph()).unwrap().wait().unwrap();
        let log = pl.take_trace().unwrap();
        prop_assert_eq!(log.num_tokens, tokens);
        prop_assert_eq!(log.events.len() as u64, tokens * types.len() as u64);
        let report = validate(&log);
        prop_assert!(report.passed(), "{}", report);
    }
}
