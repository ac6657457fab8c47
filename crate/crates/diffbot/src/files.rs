//! Calibration tables, map images and run reports on disk.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use diffbot_core::autonomy::{CellState, GridConfig, OccupancyGrid};
use diffbot_core::control::{CalibrationTable, WheelTable};
use diffbot_core::Pose2D;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigContext, Failure, Result};

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationRow {
    wheel: String,
    pwm: i32,
    speed_mps: f64,
}

/// Writes `wheel,pwm,speed_mps` rows, left wheel first, each sorted by PWM.
pub fn write_calibration(path: &Path, table: &CalibrationTable) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for (wheel, t) in [("left", &table.left), ("right", &table.right)] {
        for &(pwm, speed_mps) in t.entries() {
            w.serialize(CalibrationRow {
                wheel: wheel.into(),
                pwm,
                speed_mps,
            })?;
        }
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_calibration(path: &Path) -> Result<CalibrationTable> {
    let mut r = csv::Reader::from_path(path)
        .with_context(|| format!("reading calibration table {}", path.display()))
        .config_err()?;
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (i, row) in r.deserialize::<CalibrationRow>().enumerate() {
        let row = row
            .with_context(|| format!("{}: row {}", path.display(), i + 2))
            .config_err()?;
        match row.wheel.as_str() {
            "left" => left.push((row.pwm, row.speed_mps)),
            "right" => right.push((row.pwm, row.speed_mps)),
            other => {
                return Err(Failure::config(format!(
                    "{}: row {}: unknown wheel `{other}`",
                    path.display(),
                    i + 2
                )))
            }
        }
    }
    let build = |entries, wheel| {
        WheelTable::new(entries).map_err(|e| Failure::config(format!("{}: {wheel} table: {e}", path.display())))
    };
    Ok(CalibrationTable {
        left: build(left, "left")?,
        right: build(right, "right")?,
    })
}

pub const PGM_OCCUPIED: u8 = 0;
pub const PGM_FREE: u8 = 254;
pub const PGM_UNKNOWN: u8 = 205;

/// Binary PGM pixels, row 0 at the top (largest y).
pub fn map_pixels(grid: &OccupancyGrid, cfg: &GridConfig) -> Vec<u8> {
    let mut px = Vec::with_capacity(grid.width * grid.height);
    for row in 0..grid.height {
        let cy = grid.height - 1 - row;
        for cx in 0..grid.width {
            px.push(match grid.classify(cx, cy, cfg) {
                CellState::Occupied => PGM_OCCUPIED,
                CellState::Free => PGM_FREE,
                CellState::Unknown => PGM_UNKNOWN,
            });
        }
    }
    px
}

/// Writes `<stem>.pgm` and a `<stem>.txt` sidecar with the grid geometry.
pub fn export_map(grid: &OccupancyGrid, cfg: &GridConfig, stem: &Path) -> anyhow::Result<()> {
    let pgm = stem.with_extension("pgm");
    let mut f = BufWriter::new(File::create(&pgm).with_context(|| format!("creating {}", pgm.display()))?);
    write!(f, "P5\n{} {}\n255\n", grid.width, grid.height)?;
    f.write_all(&map_pixels(grid, cfg))?;
    f.flush().with_context(|| format!("writing {}", pgm.display()))?;

    let meta = stem.with_extension("txt");
    let text = format!(
        "image: {}\nresolution: {}\norigin: {} {} {}\nwidth: {}\nheight: {}\noccupied_thresh: {}\nfree_thresh: {}\n",
        pgm.file_name().unwrap_or_default().to_string_lossy(),
        grid.resolution,
        grid.origin.x,
        grid.origin.y,
        grid.origin.theta,
        grid.width,
        grid.height,
        cfg.occ_threshold,
        cfg.free_threshold,
    );
    fs::write(&meta, text).with_context(|| format!("writing {}", meta.display()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub ticks: u64,
    pub time: f64,
    pub final_odom_pose: Pose2D,
    pub final_true_pose: Pose2D,
    /// Planar distance between the odometry and true positions.
    pub drift_norm: f64,
    pub heading_error: f64,
    pub estop_latched: bool,
    pub collided: bool,
}

impl Report {
    pub fn new(ticks: u64, time: f64, odom: Pose2D, truth: Pose2D, estop_latched: bool, collided: bool) -> Self {
        Self {
            ticks,
            time,
            final_odom_pose: odom,
            final_true_pose: truth,
            drift_norm: odom.distance_to(&truth),
            heading_error: diffbot_core::kinematics::normalize_angle(odom.theta - truth.theta),
            estop_latched,
            collided,
        }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
