//! Workload descriptions shared by the CLI subcommands.

use pipeweave::pipeline::PipeType;

/// Which benchmark family a run belongs to; becomes the CSV workload column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadKind {
    Micro,
    Graph,
    Place,
    DemoIterative,
}

impl WorkloadKind {
    pub fn name(self) -> &'static str {
        match self {
            WorkloadKind::Micro => "micro",
            WorkloadKind::Graph => "graph",
            WorkloadKind::Place => "place",
            WorkloadKind::DemoIterative => "demo-iterative",
        }
    }
}

/// Common description of a benchmark run.
#[derive(Debug, Clone)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    pub lines: usize,
    pub pipe_types: Vec<PipeType>,
    pub tokens: u64,
    pub threads: usize,
    pub work_us: u64,
    pub runs: usize,
    pub seed: u64,
}

/// Errors in a workload description; the CLI maps these to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("pipe type string is empty")]
    EmptyTypes,
    #[error("pipe type string must start with 's' (the first pipe is serial)")]
    FirstNotSerial,
    #[error("invalid pipe type character `{0}`; use 's' or 'p'")]
    BadTypeChar(char),
    #[error("runs must be at least 1")]
    ZeroRuns,
    #[error("lines must be at least 1")]
    ZeroLines,
    #[error("threads must be at least 1")]
    ZeroThreads,
}

/// Parse a type string like `"spps"` into pipe types.
pub fn parse_pipe_types(types: &str) -> Result<Vec<PipeType>, SpecError> {
    if types.is_empty() {
        return Err(SpecError::EmptyTypes);
    }
    let mut out = Vec::with_capacity(types.len());
    for (i, c) in types.chars().enumerate() {
        let t = match c.to_ascii_lowercase() {
            's' => PipeType::Serial,
            'p' => PipeType::Parallel,
            other => return Err(SpecError::BadTypeChar(other)),
        };
        if i == 0 && t != PipeType::Serial {
            return Err(SpecError::FirstNotSerial);
        }
        out.push(t);
    }
    Ok(out)
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.lines == 0 {
            return Err(SpecError::ZeroLines);
        }
        if self.threads == 0 {
            return Err(SpecError::ZeroThreads);
        }
        if self.runs == 0 {
            return Err(SpecError::ZeroRuns);
        }
        if self.pipe_types.is_empty() {
            return Err(SpecError::EmptyTypes);
        }
        if self.pipe_types[0] != PipeType::Serial {
            return Err(SpecError::FirstNotSerial);
        }
        Ok(())
    }
}
