//! Diagnostic logging controlled by the `PIPEWEAVE_LOG` environment
//! variable. Levels: `off` (default), `info`, `trace`.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum LogLevel {
    Off,
    Info,
    Trace,
}

pub(crate) fn level() -> LogLevel {
    static LEVEL: OnceLock<LogLevel> = OnceLock::new();
    *LEVEL.get_or_init(|| {
        match std::env::var("PIPEWEAVE_LOG")
            .unwrap_or_default()
            .to_ascii_lowercase()
            .as_str()
        {
            "info" => LogLevel::Info,
            "trace" => LogLevel::Trace,
            _ => LogLevel::Off,
        }
    })
}

macro_rules! log_info {
    ($($arg:tt)*) => {
        if $crate::logging::level() >= $crate::logging::LogLevel::Info {
            eprintln!("[pipeweave] {}", format_args!($($arg)*));
        }
    };
}

macro_rules! log_trace {
    ($($arg:tt)*) => {
        if $crate::logging::level() >= $crate::logging::LogLevel::Trace {
            eprintln!("[pipeweave trace] {}", format_args!($($arg)*));
        }
    };
}

pub(crate) use log_info;
pub(crate) use log_trace;
