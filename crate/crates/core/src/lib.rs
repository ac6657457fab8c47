//! Differential-drive robot control stack.
//!
//! The crate is `no_std` (it needs `alloc`) and holds everything that does not
//! touch the file system or the network: drive kinematics, dead-reckoning
//! odometry, the PID and lookup-table wheel speed controllers, a first-order
//! motor plant with simulated sensors, the deterministic tick bus that wires
//! them together, and two small autonomy behaviours (go-to-pose and log-odds
//! occupancy mapping).
//!
//! All units are SI: meters, seconds, radians, meters per second.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autonomy;
pub mod bus;
pub mod control;
mod error;
pub mod kinematics;
pub mod odometry;
pub mod plant;

pub use error::Error;
pub use kinematics::{ChassisGeometry, IccResult, Pose2D, Twist2D, WheelSpeeds};
