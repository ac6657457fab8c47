//! Differential-drive geometry: poses, body twists, wheel speeds and the
//! conversions between them.
//!
//! Frames follow the usual mobile-robot convention: `x` points forward, `y`
//! to the left and `theta` is measured counter-clockwise from the global
//! `x` axis.

use core::f64::consts::{PI, TAU};

use libm::{cos, fmod, sin};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error};

/// 3x3 row-major matrix.
pub type Matrix3 = [[f64; 3]; 3];

/// Planar pose in the global frame.
///
/// `theta` is left unnormalized so that integrated headings keep their
/// winding; use [`normalize_angle`] when a wrapped value is needed.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Euclidean distance between the positions of two poses.
    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        libm::hypot(other.x - self.x, other.y - self.y)
    }

    /// Same pose with heading wrapped into `(-pi, pi]`.
    pub fn normalized(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, normalize_angle(self.theta))
    }
}

/// Planar velocity `(vx, vy, omega)`.
///
/// Depending on context this is either a body-frame twist (the `cmd_vel`
/// payload) or the global-frame pose rate.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist2D {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Twist2D {
    pub const ZERO: Twist2D = Twist2D::new(0.0, 0.0, 0.0);

    pub const fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }
}

/// Left and right wheel rim speeds in m/s.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelSpeeds {
    pub left: f64,
    pub right: f64,
}

impl WheelSpeeds {
    pub const ZERO: WheelSpeeds = WheelSpeeds::new(0.0, 0.0);

    pub const fn new(left: f64, right: f64) -> Self {
        Self { left, right }
    }

    pub fn is_finite(&self) -> bool {
        self.left.is_finite() && self.right.is_finite()
    }

    /// Scales both wheels by the same factor so neither exceeds `limit`.
    /// The left/right ratio, and therefore the path curvature, is preserved.
    pub fn clamp_preserving_ratio(&self, limit: f64) -> WheelSpeeds {
        let peak = self.left.abs().max(self.right.abs());
        if peak <= limit || peak == 0.0 {
            *self
        } else {
            let k = limit / peak;
            WheelSpeeds::new(self.left * k, self.right * k)
        }
    }
}

/// Physical chassis parameters.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChassisGeometry {
    /// Distance between the two drive wheel contact points.
    pub track_width: f64,
    pub wheel_radius: f64,
}

impl Default for ChassisGeometry {
    fn default() -> Self {
        Self {
            track_width: 0.2,
            wheel_radius: 0.034,
        }
    }
}

impl ChassisGeometry {
    pub fn new(track_width: f64, wheel_radius: f64) -> Result<Self, Error> {
        let geom = Self {
            track_width,
            wheel_radius,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<(), Error> {
        ensure_positive(self.track_width, "track width must be positive")?;
        ensure_positive(self.wheel_radius, "wheel radius must be positive")
    }
}

/// Instantaneous centre of curvature of the chassis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IccResult {
    /// Both wheels turn at the same speed; the centre is at infinity.
    StraightLine,
    /// Signed turning radius (positive to the left) and body yaw rate.
    /// `radius * omega` equals the forward speed.
    Turning { radius: f64, omega: f64 },
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = fmod(angle + PI, TAU);
    if a <= 0.0 {
        a += TAU;
    }
    a - PI
}

/// Global-to-local rotation for heading `theta`.
pub fn rotation_matrix(theta: f64) -> Matrix3 {
    let (s, c) = (sin(theta), cos(theta));
    [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn apply(m: &Matrix3, t: &Twist2D) -> Twist2D {
    let v = [t.vx, t.vy, t.omega];
    let row = |r: &[f64; 3]| r[0] * v[0] + r[1] * v[1] + r[2] * v[2];
    Twist2D::new(row(&m[0]), row(&m[1]), row(&m[2]))
}

/// Expresses a global-frame rate in the body frame of a robot with heading `theta`.
pub fn global_to_local(theta: f64, global: &Twist2D) -> Twist2D {
    apply(&rotation_matrix(theta), global)
}

/// Inverse of [`global_to_local`]: body-frame twist to global pose rate.
pub fn local_to_global(theta: f64, local: &Twist2D) -> Twist2D {
    // The inverse of a rotation is its transpose.
    let m = rotation_matrix(theta);
    let t = [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ];
    apply(&t, local)
}

/// Body twist produced by the given wheel speeds. The lateral component is
/// always zero.
pub fn synthesize(wheels: &WheelSpeeds, geom: &ChassisGeometry) -> Twist2D {
    Twist2D::new(
        (wheels.right + wheels.left) / 2.0,
        0.0,
        (wheels.right - wheels.left) / geom.track_width,
    )
}

/// Wheel speeds that realise `twist`. `twist.vy` is ignored since the
/// chassis cannot move sideways.
pub fn decompose(twist: &Twist2D, geom: &ChassisGeometry) -> WheelSpeeds {
    let half = twist.omega * geom.track_width / 2.0;
    WheelSpeeds::new(twist.vx - half, twist.vx + half)
}

pub fn icc(wheels: &WheelSpeeds, geom: &ChassisGeometry) -> IccResult {
    if wheels.left == wheels.right {
        return IccResult::StraightLine;
    }
    let twist = synthesize(wheels, geom);
    IccResult::Turning {
        radius: twist.vx / twist.omega,
        omega: twist.omega,
    }
}

/// Validates that a twist carries only finite values.
pub fn check_twist(twist: &Twist2D) -> Result<(), Error> {
    ensure_finite(twist.vx, "twist vx")?;
    ensure_finite(twist.vy, "twist vy")?;
    ensure_finite(twist.omega, "twist omega")
}
