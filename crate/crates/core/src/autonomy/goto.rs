//! Three-phase reactive go-to-pose law: turn towards and drive to the goal
//! position, rotate in place to the goal heading, then stop.

use core::f64::consts::FRAC_PI_6;

use libm::atan2;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error};
use crate::kinematics::{normalize_angle, Pose2D, Twist2D};

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalSpec {
    pub goal: Pose2D,
    pub pos_tolerance: f64,
    pub heading_tolerance: f64,
}

impl GoalSpec {
    pub fn new(goal: Pose2D) -> Self {
        Self {
            goal,
            pos_tolerance: 0.05,
            heading_tolerance: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        ensure_positive(self.pos_tolerance, "position tolerance must be positive")?;
        ensure_positive(self.heading_tolerance, "heading tolerance must be positive")?;
        if !self.goal.is_finite() {
            return Err(Error::InvalidArgument("goal must be finite"));
        }
        Ok(())
    }
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoToPoseParams {
    /// Yaw rate per radian of bearing or heading error.
    pub k_beta: f64,
    /// Forward speed per meter of remaining distance.
    pub k_v: f64,
    /// Bearing error above which the robot turns in place instead of driving.
    pub beta_gate: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for GoToPoseParams {
    fn default() -> Self {
        Self {
            k_beta: 2.0,
            k_v: 0.5,
            beta_gate: FRAC_PI_6,
            v_max: 0.3,
            omega_max: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalPhase {
    /// Still outside the position tolerance.
    Driving,
    /// In position, turning to the goal heading.
    Aligning,
    Arrived,
}

pub fn goal_phase(current: &Pose2D, spec: &GoalSpec) -> GoalPhase {
    if current.distance_to(&spec.goal) > spec.pos_tolerance {
        GoalPhase::Driving
    } else if normalize_angle(spec.goal.theta - current.theta).abs() > spec.heading_tolerance {
        GoalPhase::Aligning
    } else {
        GoalPhase::Arrived
    }
}

/// Body twist that moves `current` towards `spec.goal`.
pub fn go_to_pose(current: &Pose2D, spec: &GoalSpec, params: &GoToPoseParams) -> Twist2D {
    let turn = |err: f64| (params.k_beta * err).clamp(-params.omega_max, params.omega_max);
    match goal_phase(current, spec) {
        GoalPhase::Driving => {
            let (dx, dy) = (spec.goal.x - current.x, spec.goal.y - current.y);
            let bearing = normalize_angle(atan2(dy, dx) - current.theta);
            let v = if bearing.abs() > params.beta_gate {
                0.0
            } else {
                (params.k_v * libm::hypot(dx, dy)).min(params.v_max)
            };
            Twist2D::new(v, 0.0, turn(bearing))
        }
        GoalPhase::Aligning => Twist2D::new(0.0, 0.0, turn(normalize_angle(spec.goal.theta - current.theta))),
        GoalPhase::Arrived => Twist2D::ZERO,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::FRAC_PI_2;
    use proptest::prelude::*;

    #[test]
    fn arrived_gives_zero() {
        let spec = GoalSpec::new(Pose2D::new(1.0, 2.0, 0.5));
        let t = go_to_pose(&spec.goal, &spec, &GoToPoseParams::default());
        assert_eq!(t, Twist2D::ZERO);
        assert_eq!(goal_phase(&spec.goal, &spec), GoalPhase::Arrived);
    }

    #[test]
    fn goal_dead_ahead_drives_at_v_max() {
        let spec = GoalSpec::new(Pose2D::new(1.0, 0.0, 0.0));
        let t = go_to_pose(&Pose2D::default(), &spec, &GoToPoseParams::default());
        assert_eq!(t, Twist2D::new(0.3, 0.0, 0.0));
    }

    #[test]
    fn goal_abeam_rotates_in_place() {
        let spec = GoalSpec::new(Pose2D::new(0.0, 1.0, 0.0));
        let p = GoToPoseParams::default();
        let t = go_to_pose(&Pose2D::default(), &spec, &p);
        assert_eq!(t.vx, 0.0);
        assert_abs_diff_eq!(t.omega, (p.k_beta * FRAC_PI_2).min(p.omega_max));
    }

    #[test]
    fn aligns_heading_when_in_position() {
        let spec = GoalSpec::new(Pose2D::new(0.0, 0.0, -0.5));
        let t = go_to_pose(&Pose2D::new(0.01, 0.0, 0.0), &spec, &GoToPoseParams::default());
        assert_eq!(goal_phase(&Pose2D::new(0.01, 0.0, 0.0), &spec), GoalPhase::Aligning);
        assert_eq!(t, Twist2D::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn spec_validation() {
        let mut spec = GoalSpec::new(Pose2D::default());
        assert!(spec.validate().is_ok());
        spec.pos_tolerance = 0.0;
        assert!(spec.validate().is_err());
    }

    proptest! {
        #[test]
        fn output_respects_limits(
            x in -5.0f64..5.0, y in -5.0f64..5.0, th in -10.0f64..10.0,
            gx in -5.0f64..5.0, gy in -5.0f64..5.0, gth in -10.0f64..10.0,
        ) {
            let p = GoToPoseParams::default();
            let t = go_to_pose(&Pose2D::new(x, y, th), &GoalSpec::new(Pose2D::new(gx, gy, gth)), &p);
            prop_assert!(t.vx.abs() <= p.v_max);
            prop_assert!(t.omega.abs() <= p.omega_max);
            prop_assert!(t.vx >= 0.0);
            prop_assert_eq!(t.vy, 0.0);
        }
    }
}
