//! Wheel speed controllers.
//!
//! Two interchangeable strategies drive the motors: a discrete PID loop with
//! output saturation ([`pid`]), and an open-loop lookup through a measured
//! PWM to speed table ([`segmented`]).

pub mod pid;
pub mod segmented;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use pid::{pid_step, PidGains, PidState};
pub use segmented::{
    calibrate, segmented_lookup, sweep_levels, CalibrationConfig, CalibrationRig, CalibrationTable, WheelTable,
};

/// Largest PWM magnitude the 8-bit motor driver accepts.
pub const PWM_MAX: i32 = 255;

/// Signed PWM commands for both wheels, each in `[-255, 255]`.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawPwmPair"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PwmPair {
    left: i32,
    right: i32,
}

#[cfg(feature = "serde")]
#[derive(Deserialize)]
struct RawPwmPair {
    left: i32,
    right: i32,
}

#[cfg(feature = "serde")]
impl TryFrom<RawPwmPair> for PwmPair {
    type Error = Error;

    fn try_from(raw: RawPwmPair) -> Result<Self, Error> {
        PwmPair::new(raw.left, raw.right)
    }
}

impl PwmPair {
    pub const ZERO: PwmPair = PwmPair { left: 0, right: 0 };

    pub fn new(left: i32, right: i32) -> Result<Self, Error> {
        if left.abs() > PWM_MAX || right.abs() > PWM_MAX {
            return Err(Error::InvalidArgument("pwm outside [-255, 255]"));
        }
        Ok(Self { left, right })
    }

    /// Builds a pair, clamping each side into range.
    pub fn saturating(left: i32, right: i32) -> Self {
        Self {
            left: left.clamp(-PWM_MAX, PWM_MAX),
            right: right.clamp(-PWM_MAX, PWM_MAX),
        }
    }

    pub const fn left(&self) -> i32 {
        self.left
    }

    pub const fn right(&self) -> i32 {
        self.right
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pwm_pair_range_is_enforced() {
        assert!(PwmPair::new(255, -255).is_ok());
        assert!(PwmPair::new(256, 0).is_err());
        assert!(PwmPair::new(0, -300).is_err());
        assert_eq!(PwmPair::saturating(400, -900), PwmPair::new(255, -255).unwrap());
    }
}
