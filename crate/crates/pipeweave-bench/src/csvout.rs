//! CSV result rows with a fixed column set.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub const CSV_HEADER: &str =
    "workload,lines,pipes,tokens,threads,run,wall_ns,tokens_done,valid,metric";

/// One benchmark repetition. Wall times are reported per run, never
/// averaged; downstream analysis owns aggregation.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub workload: &'static str,
    pub lines: usize,
    pub pipes: usize,
    pub tokens: u64,
    pub threads: usize,
    pub run: usize,
    pub wall_ns: u128,
    pub tokens_done: u64,
    pub valid: bool,
    /// Workload-specific figure: 0 for micro, state checksum for graph,
    /// final wirelength for place.
    pub metric: String,
}

impl ResultRow {
    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            self.workload,
            self.lines,
            self.pipes,
            self.tokens,
            self.threads,
            self.run,
            self.wall_ns,
            self.tokens_done,
            self.valid,
            self.metric
        )
    }
}

/// Write header plus rows to `path`, or to stdout when `path` is `-`.
pub fn emit_csv(rows: &[ResultRow], path: &str) -> io::Result<()> {
    if path == "-" {
        let stdout = io::stdout();
        let mut w = stdout.lock();
        write_all(rows, &mut w)
    } else {
        let mut w = BufWriter::new(File::create(Path::new(path))?);
        write_all(rows, &mut w)
    }
}

fn write_all<W: Write>(rows: &[ResultRow], w: &mut W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for row in rows {
        row.write_to(w)?;
    }
    w.flush()
}

/// Render to a string; used by tests and the golden-schema check.
pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_all(rows, &mut buf).expect("write to memory");
    String::from_utf8(buf).expect("csv is ascii")
}
