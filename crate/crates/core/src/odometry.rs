//! Dead reckoning from wheel encoders.
//!
//! The pose is advanced by explicit Euler integration: each step moves the
//! robot along its heading *before* the step is applied. This is first-order
//! accurate on arcs and exact on straight segments, and its drift against
//! the true trajectory grows with distance travelled until [`correct`] resets
//! it from an external reference.

use core::f64::consts::TAU;

use libm::{cos, sin};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error};
use crate::kinematics::{synthesize, ChassisGeometry, Pose2D, WheelSpeeds};

/// Encoder tick deltas over one sampling interval.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderSample {
    pub delta_ticks_left: i64,
    pub delta_ticks_right: i64,
    pub dt: f64,
}

impl EncoderSample {
    pub const fn new(delta_ticks_left: i64, delta_ticks_right: i64, dt: f64) -> Self {
        Self {
            delta_ticks_left,
            delta_ticks_right,
            dt,
        }
    }
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub ticks_per_rev: u32,
    pub wheel_radius: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            ticks_per_rev: 1024,
            wheel_radius: 0.034,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.ticks_per_rev == 0 {
            return Err(Error::InvalidArgument("ticks_per_rev must be positive"));
        }
        ensure_positive(self.wheel_radius, "encoder wheel radius must be positive")
    }

    /// Rim distance covered by one tick.
    pub fn meters_per_tick(&self) -> f64 {
        TAU * self.wheel_radius / f64::from(self.ticks_per_rev)
    }
}

/// Running odometry estimate with its fixed sampling period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryState {
    pub pose: Pose2D,
    pub sample_time_dt: f64,
}

impl OdometryState {
    pub fn new(initial: Pose2D, sample_time_dt: f64) -> Result<Self, Error> {
        ensure_positive(sample_time_dt, "odometry sample time must be positive")?;
        Ok(Self {
            pose: initial,
            sample_time_dt,
        })
    }

    pub fn advance(&mut self, wheels: &WheelSpeeds, geom: &ChassisGeometry) -> Result<Pose2D, Error> {
        self.pose = step(&self.pose, wheels, geom, self.sample_time_dt)?;
        Ok(self.pose)
    }
}

/// Converts tick deltas to rim speeds.
pub fn ticks_to_wheel_speed(sample: &EncoderSample, cfg: &EncoderConfig) -> Result<WheelSpeeds, Error> {
    ensure_positive(sample.dt, "encoder sample dt must be positive")?;
    cfg.validate()?;
    let scale = cfg.meters_per_tick() / sample.dt;
    Ok(WheelSpeeds::new(
        sample.delta_ticks_left as f64 * scale,
        sample.delta_ticks_right as f64 * scale,
    ))
}

/// One explicit Euler step of the pose using the heading at the start of the step.
pub fn step(pose: &Pose2D, wheels: &WheelSpeeds, geom: &ChassisGeometry, dt: f64) -> Result<Pose2D, Error> {
    ensure_positive(dt, "odometry dt must be positive")?;
    let twist = synthesize(wheels, geom);
    Ok(Pose2D::new(
        pose.x + cos(pose.theta) * twist.vx * dt,
        pose.y + sin(pose.theta) * twist.vx * dt,
        pose.theta + twist.omega * dt,
    ))
}

/// Left fold of [`step`] over `(wheel speeds, dt)` samples.
pub fn integrate<I>(initial: Pose2D, samples: I, geom: &ChassisGeometry) -> Result<Pose2D, Error>
where
    I: IntoIterator<Item = (WheelSpeeds, f64)>,
{
    samples
        .into_iter()
        .try_fold(initial, |pose, (wheels, dt)| step(&pose, &wheels, geom, dt))
}

/// Replaces the estimate with an externally known pose, discarding accumulated drift.
pub fn correct(state: &OdometryState, reference_pose: Pose2D) -> OdometryState {
    OdometryState {
        pose: reference_pose,
        sample_time_dt: state.sample_time_dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    use proptest::prelude::*;

    const GEOM: ChassisGeometry = ChassisGeometry {
        track_width: 0.2,
        wheel_radius: 0.034,
    };

    // Exact pose after driving a constant twist from the origin.
    fn arc_oracle(vx: f64, omega: f64, t: f64) -> Pose2D {
        let th = omega * t;
        Pose2D::new(
            vx / omega * libm::sin(th),
            vx / omega * (1.0 - libm::cos(th)),
            th,
        )
    }

    fn wheels_for(vx: f64, omega: f64) -> WheelSpeeds {
        let half = omega * GEOM.track_width / 2.0;
        WheelSpeeds::new(vx - half, vx + half)
    }

    #[test]
    fn ticks_to_speed_examples() {
        let cfg = EncoderConfig::default();
        let w = ticks_to_wheel_speed(&EncoderSample::new(0, 0, 0.1), &cfg).unwrap();
        assert_eq!(w, WheelSpeeds::ZERO);

        // 2*pi*0.034 = 0.213628...
        let w = ticks_to_wheel_speed(&EncoderSample::new(1024, 1024, 1.0), &cfg).unwrap();
        assert_abs_diff_eq!(w.left, 0.21363, epsilon = 1e-5);
        assert_abs_diff_eq!(w.right, 0.21363, epsilon = 1e-5);

        let w = ticks_to_wheel_speed(&EncoderSample::new(-512, 512, 1.0), &cfg).unwrap();
        assert_abs_diff_eq!(w.left, -0.10681, epsilon = 1e-5);
        assert_abs_diff_eq!(w.right, 0.10681, epsilon = 1e-5);
    }

    #[test]
    fn ticks_to_speed_rejects_bad_dt() {
        let cfg = EncoderConfig::default();
        assert!(ticks_to_wheel_speed(&EncoderSample::new(1, 1, 0.0), &cfg).is_err());
        assert!(ticks_to_wheel_speed(&EncoderSample::new(1, 1, -0.1), &cfg).is_err());
    }

    #[test]
    fn step_examples() {
        let p = step(&Pose2D::default(), &WheelSpeeds::new(1.0, 1.0), &GEOM, 0.1).unwrap();
        assert_eq!(p, Pose2D::new(0.1, 0.0, 0.0));

        let p = step(&Pose2D::default(), &WheelSpeeds::new(-0.1, 0.1), &GEOM, 0.1).unwrap();
        assert_abs_diff_eq!(p.x, 0.0);
        assert_abs_diff_eq!(p.y, 0.0);
        assert_abs_diff_eq!(p.theta, 0.1, epsilon = 1e-15);

        let p = step(&Pose2D::new(0.0, 0.0, FRAC_PI_2), &WheelSpeeds::new(1.0, 1.0), &GEOM, 0.1).unwrap();
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 0.1, epsilon = 1e-15);
        assert_eq!(p.theta, FRAC_PI_2);

        assert!(step(&Pose2D::default(), &WheelSpeeds::ZERO, &GEOM, 0.0).is_err());
    }

    #[test]
    fn step_uses_heading_before_update() {
        // Spinning and driving at once: the translation must follow theta_t, not theta_t+1.
        let p = step(&Pose2D::default(), &wheels_for(1.0, 10.0), &GEOM, 0.1).unwrap();
        assert_abs_diff_eq!(p.x, 0.1, epsilon = 1e-15);
        assert_eq!(p.y, 0.0);
    }

    #[test]
    fn integrate_examples() {
        let samples = core::iter::repeat((WheelSpeeds::new(1.0, 1.0), 0.1)).take(10);
        let p = integrate(Pose2D::default(), samples, &GEOM).unwrap();
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_eq!(p.y, 0.0);
        assert_eq!(p.theta, 0.0);

        let start = Pose2D::new(1.5, -2.0, 0.7);
        assert_eq!(integrate(start, Vec::new(), &GEOM).unwrap(), start);
    }

    #[test]
    fn integrate_quarter_circle_close_to_arc() {
        let (vx, omega, dt) = (0.5, FRAC_PI_4, 0.02);
        let samples = core::iter::repeat((wheels_for(vx, omega), dt)).take(100);
        let p = integrate(Pose2D::default(), samples, &GEOM).unwrap();
        let exact = arc_oracle(vx, omega, 2.0);
        assert!(p.distance_to(&exact) < vx * dt, "error {}", p.distance_to(&exact));
        assert_abs_diff_eq!(p.theta, exact.theta, epsilon = 1e-12);
    }

    #[test]
    fn integrate_propagates_errors() {
        let samples = [(WheelSpeeds::ZERO, 0.1), (WheelSpeeds::ZERO, -1.0)];
        assert!(integrate(Pose2D::default(), samples, &GEOM).is_err());
    }

    #[test]
    fn euler_error_shrinks_first_order() {
        let (vx, omega, horizon) = (0.5, FRAC_PI_4, 2.0);
        let exact = arc_oracle(vx, omega, horizon);
        let err = |dt: f64| {
            let n = libm::round(horizon / dt) as usize;
            let samples = core::iter::repeat((wheels_for(vx, omega), dt)).take(n);
            integrate(Pose2D::default(), samples, &GEOM).unwrap().distance_to(&exact)
        };
        let (e1, e2, e3) = (err(0.1), err(0.05), err(0.025));
        assert!(e2 <= e1 / 2.0 && e3 <= e2 / 2.0, "{e1} {e2} {e3}");
    }

    #[test]
    fn correct_replaces_pose() {
        let state = OdometryState::new(Pose2D::new(3.0, 1.0, 9.0), 0.02).unwrap();
        assert_eq!(correct(&state, Pose2D::default()).pose, Pose2D::default());
        assert_eq!(correct(&state, state.pose), state);

        let truth = Pose2D::new(0.5, 0.5, 0.0);
        let mut fixed = correct(&state, truth);
        fixed.advance(&WheelSpeeds::new(1.0, 1.0), &GEOM).unwrap();
        assert_abs_diff_eq!(fixed.pose.x, 0.52, epsilon = 1e-12);
        assert_eq!(fixed.pose.y, 0.5);
    }

    #[test]
    fn state_rejects_bad_period() {
        assert!(OdometryState::new(Pose2D::default(), 0.0).is_err());
    }

    proptest! {
        #[test]
        fn straight_line_is_exact(v in -2.0f64..2.0, theta in -3.0f64..3.0, n in 1usize..200) {
            let dt = 0.125; // exactly representable
            let start = Pose2D::new(0.0, 0.0, theta);
            let p = integrate(start, core::iter::repeat((WheelSpeeds::new(v, v), dt)).take(n), &GEOM).unwrap();
            let dist = v * dt * n as f64;
            prop_assert!((p.x - libm::cos(theta) * dist).abs() < 1e-9);
            prop_assert!((p.y - libm::sin(theta) * dist).abs() < 1e-9);
            prop_assert_eq!(p.theta, theta);
        }

        #[test]
        fn integrate_is_associative(
            a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.001f64..0.2), 0..30),
            b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.001f64..0.2), 0..30),
        ) {
            let to_samples = |v: &Vec<(f64, f64, f64)>| -> Vec<(WheelSpeeds, f64)> {
                v.iter().map(|&(l, r, dt)| (WheelSpeeds::new(l, r), dt)).collect()
            };
            let (sa, sb) = (to_samples(&a), to_samples(&b));
            let start = Pose2D::new(0.3, -0.2, 1.0);
            let joined: Vec<_> = sa.iter().chain(sb.iter()).copied().collect();
            let whole = integrate(start, joined, &GEOM).unwrap();
            let split = integrate(integrate(start, sa, &GEOM).unwrap(), sb, &GEOM).unwrap();
            prop_assert_eq!(whole, split);
        }

        #[test]
        fn heading_row_is_exact(steps in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..50)) {
            let dt = 0.0625;
            let samples: Vec<_> = steps.iter().map(|&(l, r)| (WheelSpeeds::new(l, r), dt)).collect();
            let p = integrate(Pose2D::default(), samples, &GEOM).unwrap();
            let exact: f64 = steps.iter().map(|&(l, r)| (r - l) / GEOM.track_width * dt).sum();
            prop_assert!((p.theta - exact).abs() < 1e-12);
        }
    }
}
