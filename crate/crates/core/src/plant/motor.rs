//! First-order DC motor model driven by signed 8-bit PWM.

use libm::{exp, sqrt};
use rand::Rng;
use rand_distr::{Distribution, Normal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::control::PWM_MAX;
use crate::error::{ensure_positive, Error};

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorParams {
    /// Time constant of the speed lag in seconds.
    pub tau: f64,
    /// Steady-state rim speed at PWM 255.
    pub v_max: f64,
    /// PWM magnitudes at or below this produce no torque.
    pub deadband_pwm: u32,
    /// Standard deviation of the speed disturbance per sqrt(second).
    pub noise_std: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            tau: 0.15,
            v_max: 0.7,
            deadband_pwm: 0,
            noise_std: 0.0,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<(), Error> {
        ensure_positive(self.tau, "motor tau must be positive")?;
        ensure_positive(self.v_max, "motor v_max must be positive")?;
        if self.deadband_pwm >= PWM_MAX as u32 {
            return Err(Error::InvalidArgument("motor deadband must be below 255"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidArgument("motor noise must be non-negative"));
        }
        Ok(())
    }

    /// Steady-state speed the motor settles to under a constant `pwm`.
    pub fn commanded_speed(&self, pwm: i32) -> f64 {
        let deadband = self.deadband_pwm as i32;
        let mag = (pwm.abs() - deadband).max(0) as f64;
        pwm.signum() as f64 * mag / (PWM_MAX - deadband) as f64 * self.v_max
    }
}

/// Noise-free evolution of the motor over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorResponse {
    /// Speed at the end of the step.
    pub speed: f64,
    /// Rim distance covered during the step.
    pub displacement: f64,
}

fn check(pwm: i32, p: &MotorParams, dt: f64) -> Result<(), Error> {
    if pwm.abs() > PWM_MAX {
        return Err(Error::InvalidArgument("pwm outside [-255, 255]"));
    }
    ensure_positive(dt, "motor dt must be positive")?;
    p.validate()
}

/// Exact solution of `dv/dt = (v_cmd - v) / tau` over `dt` with the PWM held.
pub fn motor_response(v: f64, pwm: i32, p: &MotorParams, dt: f64) -> Result<MotorResponse, Error> {
    check(pwm, p, dt)?;
    let target = p.commanded_speed(pwm);
    let alpha = 1.0 - exp(-dt / p.tau);
    Ok(MotorResponse {
        speed: v + (target - v) * alpha,
        displacement: target * dt + (v - target) * p.tau * alpha,
    })
}

/// Advances the motor speed by one step, adding Gaussian disturbance when
/// `p.noise_std > 0`. The random source is untouched for noise-free motors.
pub fn motor_step<R: Rng + ?Sized>(v: f64, pwm: i32, p: &MotorParams, dt: f64, rng: &mut R) -> Result<f64, Error> {
    let response = motor_response(v, pwm, p, dt)?;
    Ok(response.speed + disturbance(p, dt, rng))
}

pub(crate) fn disturbance<R: Rng + ?Sized>(p: &MotorParams, dt: f64, rng: &mut R) -> f64 {
    if p.noise_std == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, p.noise_std * sqrt(dt))
        .map(|n| n.sample(rng))
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rest_stays_at_rest() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MotorParams::default();
        let mut v = 0.0;
        for _ in 0..1000 {
            v = motor_step(v, 0, &p, 0.02, &mut rng).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn full_pwm_reaches_v_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MotorParams::default();
        let mut v = 0.0;
        for _ in 0..500 {
            v = motor_step(v, 255, &p, 0.02, &mut rng).unwrap();
        }
        assert_abs_diff_eq!(v, 0.7, epsilon = 1e-12);
    }

    #[test]
    fn one_time_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = motor_step(0.0, 255, &MotorParams::default(), 0.15, &mut rng).unwrap();
        assert_abs_diff_eq!(v, 0.7 * (1.0 - (-1.0f64).exp()), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.4425, epsilon = 1e-4);
    }

    #[test]
    fn deadband_and_range() {
        let p = MotorParams {
            deadband_pwm: 40,
            ..Default::default()
        };
        assert_eq!(p.commanded_speed(40), 0.0);
        assert_eq!(p.commanded_speed(-39), 0.0);
        assert_abs_diff_eq!(p.commanded_speed(255), 0.7);
        assert_abs_diff_eq!(p.commanded_speed(-255), -0.7);
        assert!(motor_response(0.0, 256, &p, 0.1).is_err());
        assert!(motor_response(0.0, 0, &p, 0.0).is_err());
    }

    #[test]
    fn displacement_matches_quadrature() {
        let p = MotorParams::default();
        let r = motor_response(0.1, 200, &p, 0.3).unwrap();
        // Midpoint quadrature of the closed-form trajectory.
        let target = p.commanded_speed(200);
        let n = 10_000;
        let h = 0.3 / n as f64;
        let integral: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                target + (0.1 - target) * (-t / p.tau).exp()
            })
            .sum::<f64>()
            * h;
        assert_abs_diff_eq!(r.displacement, integral, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn lag_never_overshoots(v0 in -1.0f64..1.0, pwm in -255i32..=255, dt in 0.001f64..1.0) {
            let p = MotorParams::default();
            let target = p.commanded_speed(pwm);
            let mut v = v0;
            for _ in 0..50 {
                let next = motor_response(v, pwm, &p, dt).unwrap().speed;
                prop_assert!((next - target).abs() <= (v - target).abs() + 1e-15);
                prop_assert!((next - target) * (v - target) >= 0.0);
                v = next;
            }
        }
    }
}
