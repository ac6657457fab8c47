//! Small autonomy behaviours that run on top of the wheel speed stack:
//! a reactive go-to-pose controller and a log-odds occupancy mapper fed by
//! known poses.

pub mod goto;
pub mod grid;

pub use goto::{go_to_pose, goal_phase, GoToPoseParams, GoalPhase, GoalSpec};
pub use grid::{grid_update, ray_cells, CellState, GridConfig, OccupancyGrid};
