//! Simulated range and cliff sensors.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use libm::{cos, sin};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::world::World;
use crate::error::{ensure_positive, Error};
use crate::kinematics::Pose2D;

/// Distance ahead of the chassis centre where the IR cliff probe looks.
pub const CLIFF_PROBE_OFFSET: f64 = 0.05;
pub const ULTRASONIC_MAX_RANGE: f64 = 3.0;
/// Half-angle of the ultrasonic cone (15 degrees).
pub const ULTRASONIC_HALF_CONE: f64 = 15.0 * core::f64::consts::PI / 180.0;
pub const ULTRASONIC_RAYS: usize = 5;

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarConfig {
    pub beams: u32,
    pub max_range: f64,
    /// Scans per second.
    pub scan_rate: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            beams: 360,
            max_range: 8.0,
            scan_rate: 5.5,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.beams == 0 {
            return Err(Error::InvalidArgument("lidar needs at least one beam"));
        }
        ensure_positive(self.max_range, "lidar max range must be positive")?;
        ensure_positive(self.scan_rate, "lidar scan rate must be positive")
    }

    pub fn angle_increment(&self) -> f64 {
        TAU / self.beams as f64
    }
}

/// One full revolution of range readings. Beam `i` points at
/// `pose.theta + angle_min + i * angle_increment`; `None` means no return
/// within `max_range`.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub max_range: f64,
    pub ranges: Vec<Option<f64>>,
}

impl LidarScan {
    /// Beam angle relative to the robot heading.
    pub fn beam_angle(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.angle_increment
    }
}

pub fn lidar_scan(world: &World, pose: &Pose2D, cfg: &LidarConfig) -> LidarScan {
    let origin = [pose.x, pose.y];
    let n = cfg.beams as usize;
    let ranges = (0..n)
        .map(|i| {
            let angle = pose.theta + TAU * i as f64 / n as f64;
            world.raycast(origin, angle).filter(|&r| r <= cfg.max_range)
        })
        .collect();
    LidarScan {
        angle_min: 0.0,
        angle_increment: cfg.angle_increment(),
        max_range: cfg.max_range,
        ranges,
    }
}

/// True when the downward IR probe just ahead of the robot sees a drop.
pub fn cliff_check(world: &World, pose: &Pose2D) -> bool {
    let probe = [
        pose.x + CLIFF_PROBE_OFFSET * cos(pose.theta),
        pose.y + CLIFF_PROBE_OFFSET * sin(pose.theta),
    ];
    world.in_cliff(probe)
}

/// Nearest wall within a forward cone of five rays, or `None` past 3 m.
pub fn ultrasonic_range(world: &World, pose: &Pose2D) -> Option<f64> {
    let origin = [pose.x, pose.y];
    let spread = 2.0 * ULTRASONIC_HALF_CONE / (ULTRASONIC_RAYS - 1) as f64;
    (0..ULTRASONIC_RAYS)
        .filter_map(|i| {
            let angle = pose.theta - ULTRASONIC_HALF_CONE + spread * i as f64;
            world.raycast(origin, angle)
        })
        .filter(|&r| r <= ULTRASONIC_MAX_RANGE)
        .fold(None, |best: Option<f64>, r| Some(best.map_or(r, |b| b.min(r))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::world::{Bounds, Polygon, Segment};
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::{FRAC_PI_2, PI};
    use proptest::prelude::*;

    fn room(half: f64) -> World {
        let (a, b, c, d) = ([-half, -half], [half, -half], [half, half], [-half, half]);
        World {
            bounds: Bounds {
                min_x: -half - 0.5,
                min_y: -half - 0.5,
                max_x: half + 0.5,
                max_y: half + 0.5,
            },
            walls: vec![Segment(a, b), Segment(b, c), Segment(c, d), Segment(d, a)],
            cliffs: vec![],
        }
    }

    #[test]
    fn lidar_in_square_room() {
        let scan = lidar_scan(&room(2.0), &Pose2D::default(), &LidarConfig::default());
        assert_eq!(scan.ranges.len(), 360);
        assert_abs_diff_eq!(scan.ranges[0].unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(scan.ranges[45].unwrap(), 2.0 * core::f64::consts::SQRT_2, epsilon = 1e-9);
        assert_abs_diff_eq!(scan.ranges[90].unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn lidar_no_return() {
        let scan = lidar_scan(&World::empty(10.0), &Pose2D::default(), &LidarConfig::default());
        assert!(scan.ranges.iter().all(Option::is_none));
        let cfg = LidarConfig {
            max_range: 1.5,
            ..Default::default()
        };
        let scan = lidar_scan(&room(2.0), &Pose2D::default(), &cfg);
        assert!(scan.ranges.iter().all(Option::is_none));
    }

    #[test]
    fn lidar_rotation_shifts_beams() {
        let world = room(2.0);
        let cfg = LidarConfig::default();
        let start = Pose2D::new(0.3, -0.7, 0.0);
        let base = lidar_scan(&world, &start, &cfg);
        let turned = lidar_scan(&world, &Pose2D::new(0.3, -0.7, FRAC_PI_2), &cfg);
        let n = base.ranges.len();
        for i in 0..n {
            let a = turned.ranges[i].unwrap();
            let b = base.ranges[(i + n / 4) % n].unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn cliff_probe() {
        let mut world = World::empty(5.0);
        assert!(!cliff_check(&world, &Pose2D::default()));
        world.cliffs.push(Polygon(vec![[1.0, -1.0], [2.0, -1.0], [2.0, 1.0], [1.0, 1.0]]));
        assert!(cliff_check(&world, &Pose2D::new(0.96, 0.0, 0.0)));
        assert!(!cliff_check(&world, &Pose2D::new(0.96, 0.0, PI)));
        assert!(!cliff_check(&world, &Pose2D::new(0.9, 0.0, 0.0)));
    }

    #[test]
    fn ultrasonic_cone() {
        let mut world = World::empty(10.0);
        assert_eq!(ultrasonic_range(&world, &Pose2D::default()), None);
        world.walls.push(Segment([1.0, -2.0], [1.0, 2.0]));
        assert_abs_diff_eq!(ultrasonic_range(&world, &Pose2D::default()).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(ultrasonic_range(&world, &Pose2D::new(0.0, 0.0, PI)), None);
        let far = Pose2D::new(-2.5, 0.0, 0.0);
        assert_eq!(ultrasonic_range(&world, &far), None);
    }

    proptest! {
        #[test]
        fn scan_is_rigid_motion_invariant(
            x in -1.0f64..1.0, y in -1.0f64..1.0, th in -3.0f64..3.0,
            dx in -5.0f64..5.0, dy in -5.0f64..5.0, rot in -3.0f64..3.0,
        ) {
            let world = room(2.0);
            let cfg = LidarConfig { beams: 64, ..Default::default() };
            let base = lidar_scan(&world, &Pose2D::new(x, y, th), &cfg);

            let (s, c) = (libm::sin(rot), libm::cos(rot));
            let tf = |p: [f64; 2]| [c * p[0] - s * p[1] + dx, s * p[0] + c * p[1] + dy];
            let moved = World {
                bounds: Bounds { min_x: -100.0, min_y: -100.0, max_x: 100.0, max_y: 100.0 },
                walls: world.walls.iter().map(|w| Segment(tf(w.0), tf(w.1))).collect(),
                cliffs: vec![],
            };
            let p = tf([x, y]);
            let moved_scan = lidar_scan(&moved, &Pose2D::new(p[0], p[1], th + rot), &cfg);
            for (a, b) in base.ranges.iter().zip(moved_scan.ranges.iter()) {
                prop_assert!((a.unwrap() - b.unwrap()).abs() < 1e-9);
            }
        }
    }
}
