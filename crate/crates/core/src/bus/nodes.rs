//! Stateless node functions. The graph wires them to topics.

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::kinematics::{decompose, ChassisGeometry, Twist2D, WheelSpeeds};

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleopConfig {
    /// Forward speed per `w`/`s` press, m/s.
    pub v_step: f64,
    /// Turn rate per `a`/`d` press, rad/s.
    pub omega_step: f64,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        Self {
            v_step: 0.3,
            omega_step: 1.0,
        }
    }
}

/// Maps a keyboard character to a velocity command; `None` for unmapped keys.
pub fn tele_converter(key: char, cfg: &TeleopConfig) -> Option<Twist2D> {
    match key {
        'w' => Some(Twist2D::new(cfg.v_step, 0.0, 0.0)),
        's' => Some(Twist2D::new(-cfg.v_step, 0.0, 0.0)),
        'a' => Some(Twist2D::new(0.0, 0.0, cfg.omega_step)),
        'd' => Some(Twist2D::new(0.0, 0.0, -cfg.omega_step)),
        ' ' | 'x' => Some(Twist2D::ZERO),
        _ => None,
    }
}

/// Wheel targets for a body twist, scaled down together if either exceeds
/// `v_wheel_max`.
pub fn wheel_speed_node(twist: &Twist2D, geom: &ChassisGeometry, v_wheel_max: f64) -> WheelSpeeds {
    decompose(twist, geom).clamp_preserving_ratio(v_wheel_max)
}

/// Returns the twist override (zero while latched) and the new latch state.
/// A cliff always wins over a simultaneous reset.
pub fn estop_node(cliff: bool, latched: bool, reset: bool) -> (Option<Twist2D>, bool) {
    let latch = cliff || (latched && !reset);
    (latch.then_some(Twist2D::ZERO), latch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_mapping() {
        let cfg = TeleopConfig::default();
        assert_eq!(tele_converter('w', &cfg), Some(Twist2D::new(0.3, 0.0, 0.0)));
        assert_eq!(tele_converter('s', &cfg), Some(Twist2D::new(-0.3, 0.0, 0.0)));
        assert_eq!(tele_converter('a', &cfg), Some(Twist2D::new(0.0, 0.0, 1.0)));
        assert_eq!(tele_converter('d', &cfg), Some(Twist2D::new(0.0, 0.0, -1.0)));
        assert_eq!(tele_converter(' ', &cfg), Some(Twist2D::ZERO));
        assert_eq!(tele_converter('x', &cfg), Some(Twist2D::ZERO));
        assert_eq!(tele_converter('q', &cfg), None);
    }

    #[test]
    fn wheel_targets() {
        let geom = ChassisGeometry::default();
        let w = wheel_speed_node(&Twist2D::new(0.3, 0.0, 1.0), &geom, 0.6);
        assert!((w.left - 0.2).abs() < 1e-12 && (w.right - 0.4).abs() < 1e-12);
        assert_eq!(wheel_speed_node(&Twist2D::ZERO, &geom, 0.6), WheelSpeeds::ZERO);

        let w = wheel_speed_node(&Twist2D::new(0.9, 0.0, 3.0), &geom, 0.6);
        assert!((w.right - 0.6).abs() < 1e-12);
        assert!((w.left / w.right - 0.6 / 1.2).abs() < 1e-12);
    }

    #[test]
    fn estop_latch() {
        assert_eq!(estop_node(false, false, false), (None, false));
        assert_eq!(estop_node(true, false, false), (Some(Twist2D::ZERO), true));
        assert_eq!(estop_node(false, true, false), (Some(Twist2D::ZERO), true));
        assert_eq!(estop_node(false, true, true), (None, false));
        assert_eq!(estop_node(true, true, true), (Some(Twist2D::ZERO), true));
    }
}
