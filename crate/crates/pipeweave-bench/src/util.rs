//! Small shared helpers.

use std::time::{Duration, Instant};

/// Busy-wait for `micros` microseconds of wall time.
///
/// The loop yields between checks so tokens in flight on more lines than
/// cores still make progress at their nominal rate; the thread never
/// sleeps, so a worker stays hot.
pub fn spin_for_micros(micros: u64) {
    if micros == 0 {
        return;
    }
    let deadline = Instant::now() + Duration::from_micros(micros);
    while Instant::now() < deadline {
        std::hint::spin_loop();
        std::thread::yield_now();
    }
}
