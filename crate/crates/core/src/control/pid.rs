//! Discrete positional PID with symmetric output saturation and
//! conditional-integration anti-windup.

use libm::round;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::PWM_MAX;
use crate::error::{ensure_finite, ensure_positive, Error};

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    /// PWM counts per m/s of error.
    pub kp: f64,
    /// PWM counts per (m/s * s) of accumulated error.
    pub ki: f64,
    /// PWM counts per (m/s / s) of error rate.
    pub kd: f64,
    /// Controller period in seconds.
    pub sample_time: f64,
}

impl Default for PidGains {
    /// Tuned on the default motor model: 0 to 0.5 m/s rises (10-90%) in
    /// about 0.5 s with under 1% overshoot.
    fn default() -> Self {
        Self {
            kp: 300.0,
            ki: 1400.0,
            kd: 5.0,
            sample_time: 0.1,
        }
    }
}

impl PidGains {
    pub fn validate(&self) -> Result<(), Error> {
        ensure_positive(self.sample_time, "pid sample time must be positive")?;
        for g in [self.kp, self.ki, self.kd] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::InvalidArgument("pid gains must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral_accum: f64,
    pub prev_error: f64,
    pub saturated_flag: bool,
}

/// Runs one controller period and returns the PWM command with the next state.
///
/// The integral term only absorbs this period's error when the resulting
/// output stays inside `[-255, 255]`.
pub fn pid_step(state: &PidState, gains: &PidGains, target: f64, measured: f64) -> Result<(i32, PidState), Error> {
    ensure_finite(target, "pid target")?;
    ensure_finite(measured, "pid measurement")?;
    gains.validate()?;

    let ts = gains.sample_time;
    let error = target - measured;
    let mut candidate = state.integral_accum + error * ts;
    if gains.ki > 0.0 {
        let bound = PWM_MAX as f64 / gains.ki;
        candidate = candidate.clamp(-bound, bound);
    }
    let raw = gains.kp * error + gains.ki * candidate + gains.kd * (error - state.prev_error) / ts;
    let limit = PWM_MAX as f64;
    let saturated = raw.abs() > limit;

    let next = PidState {
        integral_accum: if saturated { state.integral_accum } else { candidate },
        prev_error: error,
        saturated_flag: saturated,
    };
    Ok((round(raw.clamp(-limit, limit)) as i32, next))
}
