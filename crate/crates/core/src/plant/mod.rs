//! Ground-truth robot simulation.
//!
//! The plant owns the true state of the robot: motor speeds, the exact pose
//! (integrated along circular arcs, not by Euler steps), and the encoder
//! quantizers. Everything the control stack learns about the robot comes
//! from the sensor methods on [`Plant`].

pub mod motor;
pub mod sensors;
pub mod world;

use libm::{cos, floor, sin};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::control::{CalibrationRig, PwmPair};
use crate::error::{ensure_positive, Error};
use crate::kinematics::{synthesize, ChassisGeometry, Pose2D, WheelSpeeds};
use crate::odometry::{EncoderConfig, EncoderSample};

pub use motor::{motor_response, motor_step, MotorParams, MotorResponse};
pub use sensors::{cliff_check, lidar_scan, ultrasonic_range, LidarConfig, LidarScan};
pub use world::{Bounds, Point, Polygon, Segment, World};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroundTruth {
    pub pose: Pose2D,
    /// Mean rim speeds over the most recent step.
    pub wheel_speeds_actual: WheelSpeeds,
    pub time: f64,
    /// Set once a move was blocked by a wall or the arena bounds.
    pub collided: bool,
}

/// `sin(x) / x`, continuous at zero.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        sin(x) / x
    }
}

/// Advances the true pose along the exact circular arc traced by constant
/// wheel speeds. Collisions are not considered here; see [`Plant::step`].
pub fn true_pose_step(truth: &GroundTruth, geom: &ChassisGeometry, dt: f64) -> GroundTruth {
    let twist = synthesize(&truth.wheel_speeds_actual, geom);
    let p = truth.pose;
    let pose = if twist.omega == 0.0 {
        Pose2D::new(
            p.x + cos(p.theta) * twist.vx * dt,
            p.y + sin(p.theta) * twist.vx * dt,
            p.theta,
        )
    } else {
        // Chord form of x + (v/w)(sin th' - sin th), y - (v/w)(cos th' - cos th);
        // it stays well conditioned as w approaches zero.
        let half = twist.omega * dt / 2.0;
        let chord = twist.vx * dt * sinc(half);
        let heading = p.theta + half;
        Pose2D::new(
            p.x + chord * cos(heading),
            p.y + chord * sin(heading),
            p.theta + twist.omega * dt,
        )
    };
    GroundTruth {
        pose,
        time: truth.time + dt,
        ..*truth
    }
}

/// Fractional ticks carried between encoder samples so quantization never
/// loses motion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EncoderResidual {
    ideal: [f64; 2],
    emitted: [i64; 2],
}

impl EncoderResidual {
    fn push(&mut self, wheel: usize, ideal_ticks: f64) -> i64 {
        self.ideal[wheel] += ideal_ticks;
        let total = floor(self.ideal[wheel]) as i64;
        let delta = total - self.emitted[wheel];
        self.emitted[wheel] = total;
        delta
    }

    /// Total ideal (unquantized) ticks seen so far, left and right.
    pub fn ideal_ticks(&self) -> [f64; 2] {
        self.ideal
    }

    pub fn emitted_ticks(&self) -> [i64; 2] {
        self.emitted
    }
}

/// Quantizes the wheel motion of the last step into whole encoder ticks.
pub fn encoder_sample(truth: &GroundTruth, cfg: &EncoderConfig, dt: f64, residual: &mut EncoderResidual) -> EncoderSample {
    let per_tick = cfg.meters_per_tick();
    let w = truth.wheel_speeds_actual;
    EncoderSample::new(
        residual.push(0, w.left * dt / per_tick),
        residual.push(1, w.right * dt / per_tick),
        dt,
    )
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantConfig {
    pub geometry: ChassisGeometry,
    pub encoder: EncoderConfig,
    pub left_motor: MotorParams,
    pub right_motor: MotorParams,
    pub seed: u64,
}

impl PlantConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.geometry.validate()?;
        self.encoder.validate()?;
        self.left_motor.validate()?;
        self.right_motor.validate()
    }
}

/// The simulated robot in its world.
#[derive(Debug, Clone)]
pub struct Plant {
    cfg: PlantConfig,
    world: World,
    truth: GroundTruth,
    motor_speeds: WheelSpeeds,
    residual: EncoderResidual,
    rng: ChaCha8Rng,
}

impl Plant {
    pub fn new(cfg: PlantConfig, world: World, start: Pose2D) -> Result<Self, Error> {
        cfg.validate()?;
        world.validate()?;
        if !start.is_finite() || !world.bounds.contains(start.x, start.y) {
            return Err(Error::InvalidArgument("start pose must lie inside the world bounds"));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            world,
            truth: GroundTruth {
                pose: start,
                ..Default::default()
            },
            motor_speeds: WheelSpeeds::ZERO,
            residual: EncoderResidual::default(),
        })
    }

    pub fn config(&self) -> &PlantConfig {
        &self.cfg
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    /// Instantaneous motor speeds at the end of the last step.
    pub fn motor_speeds(&self) -> WheelSpeeds {
        self.motor_speeds
    }

    pub fn encoder_residual(&self) -> &EncoderResidual {
        &self.residual
    }

    /// Holds `pwm` for `dt` seconds, moves the robot and returns the encoder
    /// ticks accumulated during the step.
    ///
    /// A move that would cross a wall or leave the bounds keeps the previous
    /// position (rotation still applies) and latches the collision flag.
    pub fn step(&mut self, pwm: PwmPair, dt: f64) -> Result<EncoderSample, Error> {
        ensure_positive(dt, "plant dt must be positive")?;
        let left = motor_response(self.motor_speeds.left, pwm.left(), &self.cfg.left_motor, dt)?;
        let right = motor_response(self.motor_speeds.right, pwm.right(), &self.cfg.right_motor, dt)?;
        let noise_l = motor::disturbance(&self.cfg.left_motor, dt, &mut self.rng);
        let noise_r = motor::disturbance(&self.cfg.right_motor, dt, &mut self.rng);
        self.motor_speeds = WheelSpeeds::new(left.speed + noise_l, right.speed + noise_r);

        self.truth.wheel_speeds_actual = WheelSpeeds::new(left.displacement / dt, right.displacement / dt);
        let before = self.truth.pose;
        let mut next = true_pose_step(&self.truth, &self.cfg.geometry, dt);
        if self.world.blocks([before.x, before.y], [next.pose.x, next.pose.y]) {
            next.pose.x = before.x;
            next.pose.y = before.y;
            next.collided = true;
        }
        self.truth = next;
        Ok(encoder_sample(&self.truth, &self.cfg.encoder, dt, &mut self.residual))
    }

    pub fn lidar(&self, cfg: &LidarConfig) -> LidarScan {
        lidar_scan(&self.world, &self.truth.pose, cfg)
    }

    pub fn cliff_ahead(&self) -> bool {
        cliff_check(&self.world, &self.truth.pose)
    }

    pub fn ultrasonic(&self) -> Option<f64> {
        ultrasonic_range(&self.world, &self.truth.pose)
    }
}

/// Runs calibration sweeps directly against a [`Plant`] at a fixed tick.
#[derive(Debug)]
pub struct PlantRig<'a> {
    pub plant: &'a mut Plant,
    pub dt: f64,
}

impl CalibrationRig for PlantRig<'_> {
    fn tick_dt(&self) -> f64 {
        self.dt
    }

    fn encoder(&self) -> EncoderConfig {
        self.plant.cfg.encoder
    }

    fn drive(&mut self, pwm: PwmPair) -> Result<EncoderSample, Error> {
        self.plant.step(pwm, self.dt)
    }
}
