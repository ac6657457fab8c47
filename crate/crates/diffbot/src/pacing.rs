//! Wall-clock pacing for real-time runs.

use std::thread;
use std::time::{Duration, Instant};

/// Wall time per tick when simulated time runs `speed` times faster than
/// the wall clock.
pub fn tick_interval(dt: f64, speed: f64) -> Result<Duration, String> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(format!("speed must be a positive number, got {speed}"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(format!("tick dt must be positive, got {dt}"));
    }
    Duration::try_from_secs_f64(dt / speed).map_err(|e| e.to_string())
}

/// Schedules tick `n` at `start + n * interval`, so pacing error does not
/// accumulate. A loop that falls behind runs ticks back to back until it
/// catches up.
#[derive(Debug, Clone, Copy)]
pub struct Pacer {
    start: Instant,
    interval: Duration,
}

impl Pacer {
    pub fn new(interval: Duration) -> Self {
        Self {
            start: Instant::now(),
            interval,
        }
    }

    pub fn deadline(&self, ticks: u64) -> Instant {
        self.start + self.interval.mul_f64(ticks as f64)
    }

    /// Sleeps until `ticks` ticks' worth of wall time has passed.
    pub fn wait(&self, ticks: u64) {
        let now = Instant::now();
        let due = self.deadline(ticks);
        if due > now {
            thread::sleep(due - now);
        }
    }
}
