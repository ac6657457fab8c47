//! Runs `diffbot-core` simulations from JSON scenario files, records topic
//! traces, calibrates the simulated motors and serves a live WebSocket
//! bridge for browser teleoperation.

pub mod bridge;
pub mod config;
pub mod error;
pub mod files;
pub mod frames;
pub mod pacing;
pub mod run;
pub mod script;
pub mod trace;

pub use config::{Scenario, ScenarioConfig};
pub use error::Failure;
