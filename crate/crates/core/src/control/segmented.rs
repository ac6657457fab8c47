//! Open-loop wheel speed control through a measured PWM to speed table.
//!
//! [`calibrate`] sweeps each wheel in turn across the PWM range while the
//! other wheel is held at zero, records the steady-state speed at every
//! level, and monotonizes the result. [`segmented_lookup`] inverts the table
//! by linear interpolation.

use alloc::vec::Vec;

use libm::round;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{PwmPair, PWM_MAX};
use crate::error::{ensure_finite, ensure_positive, Error};
use crate::odometry::{EncoderConfig, EncoderSample};

/// Monotone PWM to steady-state speed map for one wheel.
///
/// Entries are sorted by strictly increasing PWM, speeds never decrease,
/// and `(0, 0.0)` is always present.
#[derive(Debug, Clone, PartialEq)]
pub struct WheelTable {
    entries: Vec<(i32, f64)>,
    zero: usize,
}

impl WheelTable {
    pub fn new(entries: Vec<(i32, f64)>) -> Result<Self, Error> {
        if entries.is_empty() {
            return Err(Error::InvalidTable("table is empty"));
        }
        for &(pwm, speed) in &entries {
            if pwm.abs() > PWM_MAX {
                return Err(Error::InvalidTable("pwm outside [-255, 255]"));
            }
            if !speed.is_finite() {
                return Err(Error::InvalidTable("non-finite speed"));
            }
        }
        for pair in entries.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::InvalidTable("pwm not strictly increasing"));
            }
            if pair[1].1 < pair[0].1 {
                return Err(Error::InvalidTable("speed decreases with pwm"));
            }
        }
        let zero = entries
            .iter()
            .position(|&(pwm, speed)| pwm == 0 && speed == 0.0)
            .ok_or(Error::InvalidTable("missing (0, 0) anchor"))?;
        Ok(Self { entries, zero })
    }

    /// Builds a table from raw sweep measurements.
    ///
    /// `positive` holds `(pwm >= 0, speed)` samples; `negative` holds
    /// `(pwm < 0, speed)` samples, or `None` to mirror the positive side.
    /// Each side is made monotone away from zero with a running max (min),
    /// which also pins the zero entry to exactly `0.0`.
    pub fn from_sweep(positive: &[(i32, f64)], negative: Option<&[(i32, f64)]>) -> Result<Self, Error> {
        let mut pos: Vec<(i32, f64)> = positive.iter().copied().filter(|&(p, _)| p > 0).collect();
        pos.sort_by_key(|&(p, _)| p);
        let mut running = 0.0f64;
        for entry in &mut pos {
            running = running.max(entry.1);
            entry.1 = running;
        }

        let mut neg: Vec<(i32, f64)> = match negative {
            Some(samples) => samples.iter().copied().filter(|&(p, _)| p < 0).collect(),
            None => pos.iter().map(|&(p, s)| (-p, -s)).collect(),
        };
        // Walk from zero outwards.
        neg.sort_by_key(|&(p, _)| core::cmp::Reverse(p));
        let mut running = 0.0f64;
        for entry in &mut neg {
            running = running.min(entry.1);
            entry.1 = running;
        }
        neg.reverse();

        let mut entries = neg;
        entries.push((0, 0.0));
        entries.extend(pos);
        entries.dedup_by_key(|e| e.0);
        WheelTable::new(entries)
    }

    pub fn entries(&self) -> &[(i32, f64)] {
        &self.entries
    }

    /// Largest non-negative PWM that still produces zero speed.
    pub fn deadband_pwm(&self) -> i32 {
        self.entries[self.zero..]
            .iter()
            .take_while(|&&(_, s)| s == 0.0)
            .last()
            .map_or(0, |&(p, _)| p)
    }

    /// Speed recorded at the highest PWM.
    pub fn max_speed(&self) -> f64 {
        self.entries[self.entries.len() - 1].1
    }

    pub fn min_speed(&self) -> f64 {
        self.entries[0].1
    }
}

/// Calibrated tables for both wheels.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTable {
    pub left: WheelTable,
    pub right: WheelTable,
}

/// Finds the PWM whose steady-state speed is `target` by linear
/// interpolation between the bracketing entries, rounded to the nearest
/// count. Targets outside the table clamp to full scale.
pub fn segmented_lookup(table: &WheelTable, target: f64) -> Result<i32, Error> {
    ensure_finite(target, "lookup target")?;
    let e = &table.entries;
    let z = table.zero;
    if target == 0.0 {
        return Ok(0);
    }

    let (lo, hi) = if target > 0.0 {
        match e[z + 1..].iter().position(|&(_, s)| s >= target) {
            Some(k) => (e[z + k], e[z + k + 1]),
            None => return Ok(PWM_MAX),
        }
    } else {
        match e[..z].iter().rev().position(|&(_, s)| s <= target) {
            Some(k) => (e[z - k], e[z - k - 1]),
            None => return Ok(-PWM_MAX),
        }
    };
    // `lo` is the entry closer to zero; `hi` reaches or passes the target.
    if hi.1 == target {
        return Ok(hi.0);
    }
    let frac = (target - lo.1) / (hi.1 - lo.1);
    let pwm = round(lo.0 as f64 + frac * (hi.0 - lo.0) as f64) as i32;
    if lo.1 == 0.0 {
        // A nonzero target must leave the deadband, where `lo` produces no motion.
        let step = (hi.0 - lo.0).signum();
        if (pwm - lo.0) * step < 1 {
            return Ok(lo.0 + step);
        }
    }
    Ok(pwm)
}

/// PWM levels visited by a sweep with the given step: `0, step, 2*step, ...`
/// up to 255, with 255 appended when the step does not land on it.
pub fn sweep_levels(step: u32) -> Result<Vec<i32>, Error> {
    if step == 0 {
        return Err(Error::InvalidArgument("calibration step must be positive"));
    }
    let step = step.min(PWM_MAX as u32) as i32;
    let mut levels: Vec<i32> = (0..=PWM_MAX).step_by(step as usize).collect();
    if levels.last() != Some(&PWM_MAX) {
        levels.push(PWM_MAX);
    }
    Ok(levels)
}

/// Plant side of a calibration run.
pub trait CalibrationRig {
    /// Length of one [`drive`](CalibrationRig::drive) call in seconds.
    fn tick_dt(&self) -> f64;
    fn encoder(&self) -> EncoderConfig;
    /// Applies `pwm` for one tick and returns the encoder deltas.
    fn drive(&mut self, pwm: PwmPair) -> Result<EncoderSample, Error>;
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    /// PWM increment between sweep levels.
    pub step: u32,
    /// Time spent at each level before measuring.
    pub settle_time: f64,
    /// Averaging window after settling.
    pub window: f64,
    /// Sweep negative PWM levels too instead of mirroring the positive side.
    pub signed_sweep: bool,
    /// Window tick counts at or below this are recorded as zero speed.
    pub zero_tick_threshold: u32,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            step: 15,
            settle_time: 1.0,
            window: 0.5,
            signed_sweep: false,
            zero_tick_threshold: 1,
        }
    }
}


#[derive(Clone, Copy, PartialEq, Eq)]
enum Wheel {
    Left,
    Right,
}

struct Sweep<'a, R: CalibrationRig> {
    rig: &'a mut R,
    settle_ticks: usize,
    window_ticks: usize,
    meters_per_tick: f64,
    window_seconds: f64,
    zero_ticks: i64,
}

impl<R: CalibrationRig> Sweep<'_, R> {
    fn hold(&mut self, pwm: PwmPair, ticks: usize) -> Result<(i64, i64), Error> {
        let mut sum = (0i64, 0i64);
        for _ in 0..ticks {
            let sample = self
                .rig
                .drive(pwm)
                .map_err(|_| Error::CalibrationAborted("plant rejected a command"))?;
            sum.0 += sample.delta_ticks_left;
            sum.1 += sample.delta_ticks_right;
        }
        Ok(sum)
    }

    /// Drives one wheel at `pwm` (the other at zero), settles, and returns the
    /// mean speed over the measurement window.
    fn measure(&mut self, wheel: Wheel, pwm: i32) -> Result<f64, Error> {
        let cmd = match wheel {
            Wheel::Left => PwmPair::new(pwm, 0)?,
            Wheel::Right => PwmPair::new(0, pwm)?,
        };
        self.hold(cmd, self.settle_ticks)?;
        let (l, r) = self.hold(cmd, self.window_ticks)?;
        let ticks = if wheel == Wheel::Left { l } else { r };
        if ticks.abs() <= self.zero_ticks {
            return Ok(0.0);
        }
        Ok(ticks as f64 * self.meters_per_tick / self.window_seconds)
    }

    fn rest(&mut self) -> Result<(), Error> {
        self.hold(PwmPair::ZERO, self.settle_ticks).map(|_| ())
    }

    /// Sweeps `levels` (all of one sign) and then pins down the deadband
    /// edge: the largest PWM that still yields zero speed.
    fn sweep(&mut self, wheel: Wheel, levels: &[i32]) -> Result<Vec<(i32, f64)>, Error> {
        let mut out = Vec::with_capacity(levels.len() + 1);
        for &pwm in levels {
            let speed = if pwm == 0 { 0.0 } else { self.measure(wheel, pwm)? };
            out.push((pwm, speed));
        }

        let edge = out.windows(2).position(|w| w[0].1 == 0.0 && w[1].1 != 0.0);
        if let Some(i) = edge {
            let (mut still, mut moving) = (out[i].0, out[i + 1].0);
            while (moving - still).abs() > 1 {
                let mid = still + (moving - still) / 2;
                self.rest()?;
                if self.measure(wheel, mid)? == 0.0 {
                    still = mid;
                } else {
                    moving = mid;
                }
            }
            if still != out[i].0 {
                out.insert(i + 1, (still, 0.0));
            }
        }
        self.rest()?;
        Ok(out)
    }
}

/// Measures the PWM to speed map of both wheels.
///
/// Each wheel is swept in turn with the other wheel commanded to zero.
/// Negative levels are mirrored from the positive sweep unless
/// `cfg.signed_sweep` is set.
pub fn calibrate<R: CalibrationRig>(rig: &mut R, cfg: &CalibrationConfig) -> Result<CalibrationTable, Error> {
    let dt = rig.tick_dt();
    ensure_positive(dt, "rig tick must be positive")?;
    ensure_positive(cfg.window, "measurement window must be positive")?;
    if !(cfg.settle_time.is_finite() && cfg.settle_time >= 0.0) {
        return Err(Error::InvalidArgument("settle time must be non-negative"));
    }
    let encoder = rig.encoder();
    encoder.validate()?;
    let levels = sweep_levels(cfg.step)?;
    let negative_levels: Vec<i32> = levels.iter().map(|&p| -p).collect();

    let window_ticks = (round(cfg.window / dt) as usize).max(1);
    let mut sweep = Sweep {
        rig,
        settle_ticks: round(cfg.settle_time / dt) as usize,
        window_ticks,
        meters_per_tick: encoder.meters_per_tick(),
        window_seconds: window_ticks as f64 * dt,
        zero_ticks: i64::from(cfg.zero_tick_threshold),
    };

    sweep.rest()?;
    let mut tables = Vec::with_capacity(2);
    for wheel in [Wheel::Left, Wheel::Right] {
        let pos = sweep.sweep(wheel, &levels)?;
        let neg = if cfg.signed_sweep {
            Some(sweep.sweep(wheel, &negative_levels)?)
        } else {
            None
        };
        tables.push(WheelTable::from_sweep(&pos, neg.as_deref())?);
    }
    let right = tables.pop().expect("two tables");
    let left = tables.pop().expect("two tables");
    Ok(CalibrationTable { left, right })
}
