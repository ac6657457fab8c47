//! Scenario configuration (JSON, SI units: meters, seconds, radians).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use diffbot_core::autonomy::{GoToPoseParams, GridConfig};
use diffbot_core::bus::{ControllerChoice, GraphConfig, Mode, PoseSource, TeleopConfig, TickSchedule};
use diffbot_core::control::{CalibrationConfig, PidGains};
use diffbot_core::odometry::EncoderConfig;
use diffbot_core::plant::{LidarConfig, MotorParams, Plant, PlantConfig, World};
use diffbot_core::{ChassisGeometry, Pose2D};
use serde::{Deserialize, Serialize};

use crate::error::{ConfigContext, Failure, Result};
use crate::files;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// World file, relative to the config file. Absent means an open 20 m arena.
    pub world: Option<PathBuf>,
    pub start: Pose2D,
    pub geometry: ChassisGeometry,
    pub encoder: EncoderConfig,
    pub left_motor: MotorParams,
    pub right_motor: MotorParams,
    pub controller: ControllerSpec,
    pub tick_dt: f64,
    pub control_period_ticks: u32,
    pub v_wheel_max: f64,
    pub teleop: TeleopConfig,
    pub lidar: Option<LidarConfig>,
    pub mode: ModeSpec,
    /// Simulated seconds for `sim`.
    pub duration: f64,
    pub seed: u64,
    /// Key script, relative to the config file.
    pub script: Option<PathBuf>,
    pub calibration: CalibrationConfig,
    /// Output directory, relative to the working directory.
    pub out_dir: PathBuf,
    /// Static UI bundle served by `serve`, relative to the config file.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let schedule = TickSchedule::default();
        Self {
            world: None,
            start: Pose2D::default(),
            geometry: ChassisGeometry::default(),
            encoder: EncoderConfig::default(),
            left_motor: MotorParams::default(),
            right_motor: MotorParams::default(),
            controller: ControllerSpec::default(),
            tick_dt: schedule.dt,
            control_period_ticks: schedule.control_period_ticks,
            v_wheel_max: 0.6,
            teleop: TeleopConfig::default(),
            lidar: Some(LidarConfig::default()),
            mode: ModeSpec::Teleop,
            duration: 10.0,
            seed: 0,
            script: None,
            calibration: CalibrationConfig::default(),
            out_dir: PathBuf::from("out"),
            ui_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControllerSpec {
    /// The PID sample time is always the control period.
    Pid {
        #[serde(default = "default_kp")]
        kp: f64,
        #[serde(default = "default_ki")]
        ki: f64,
        #[serde(default = "default_kd")]
        kd: f64,
    },
    /// Calibration CSV, relative to the config file.
    Segmented { table: PathBuf },
}

fn default_kp() -> f64 {
    PidGains::default().kp
}

fn default_ki() -> f64 {
    PidGains::default().ki
}

fn default_kd() -> f64 {
    PidGains::default().kd
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec::Pid {
            kp: default_kp(),
            ki: default_ki(),
            kd: default_kd(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModeSpec {
    Teleop,
    Goto {
        #[serde(default)]
        goal: Option<Pose2D>,
        #[serde(default = "default_pos_tol")]
        pos_tolerance: f64,
        #[serde(default = "default_heading_tol")]
        heading_tolerance: f64,
        #[serde(default)]
        params: GoToPoseParams,
    },
    Map {
        #[serde(default)]
        grid: GridConfig,
        #[serde(default)]
        pose_source: PoseSource,
    },
}

fn default_pos_tol() -> f64 {
    0.05
}

fn default_heading_tol() -> f64 {
    0.1
}

/// A parsed config with every referenced file loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
    pub world: World,
    pub graph: GraphConfig,
}

impl ScenarioConfig {
    pub fn plant_config(&self) -> PlantConfig {
        PlantConfig {
            geometry: self.geometry,
            encoder: self.encoder,
            left_motor: self.left_motor,
            right_motor: self.right_motor,
            seed: self.seed,
        }
    }

    pub fn schedule(&self) -> TickSchedule {
        TickSchedule {
            dt: self.tick_dt,
            control_period_ticks: self.control_period_ticks,
        }
    }
}

/// Formats a JSON error as `path:line:column: message`.
fn json_error(path: &Path, e: &serde_json::Error) -> anyhow::Error {
    anyhow!("{}:{}:{}: {}", path.display(), e.line(), e.column(), e)
}

pub fn parse_config(text: &str, path: &Path) -> Result<ScenarioConfig> {
    serde_json::from_str(text).map_err(|e| Failure::Config(json_error(path, &e)))
}

pub fn load_world(path: &Path) -> Result<World> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading world {}", path.display()))
        .config_err()?;
    let world: World = serde_json::from_str(&text).map_err(|e| Failure::Config(json_error(path, &e)))?;
    world
        .validate()
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    Ok(world)
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .config_err()?;
        let config = parse_config(&text, path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_config(config, base_dir)
    }

    /// Resolves files relative to `base_dir` and checks that the pieces fit.
    pub fn from_config(config: ScenarioConfig, base_dir: PathBuf) -> Result<Self> {
        let world = match &config.world {
            Some(p) => load_world(&base_dir.join(p))?,
            None => World::empty(10.0),
        };
        if !(config.duration.is_finite() && config.duration >= 0.0) {
            return Err(Failure::config("duration must be a non-negative number of seconds"));
        }
        let schedule = config.schedule();
        schedule.validate().config_err()?;
        let controller = match &config.controller {
            ControllerSpec::Pid { kp, ki, kd } => ControllerChoice::Pid(PidGains {
                kp: *kp,
                ki: *ki,
                kd: *kd,
                sample_time: schedule.control_period(),
            }),
            ControllerSpec::Segmented { table } => {
                ControllerChoice::Segmented(files::read_calibration(&base_dir.join(table))?)
            }
        };
        let mode = match &config.mode {
            ModeSpec::Teleop => Mode::Teleop,
            ModeSpec::Goto {
                goal,
                pos_tolerance,
                heading_tolerance,
                params,
            } => Mode::GoTo {
                goal: *goal,
                pos_tolerance: *pos_tolerance,
                heading_tolerance: *heading_tolerance,
                params: *params,
            },
            ModeSpec::Map { grid, pose_source } => Mode::Map {
                grid: *grid,
                pose_source: *pose_source,
            },
        };
        let graph = GraphConfig {
            schedule,
            geometry: config.geometry,
            encoder: config.encoder,
            v_wheel_max: config.v_wheel_max,
            teleop: config.teleop,
            controller,
            lidar: config.lidar,
            mode,
        };
        if let Some(script) = &config.script {
            let p = base_dir.join(script);
            if !p.is_file() {
                return Err(Failure::config(format!("script {} does not exist", p.display())));
            }
        }
        let scenario = Self {
            config,
            base_dir,
            world,
            graph,
        };
        // Building the plant and graph runs every remaining validation.
        let plant = scenario.plant()?;
        diffbot_core::bus::RobotGraph::new(scenario.graph.clone(), &plant).config_err()?;
        Ok(scenario)
    }

    pub fn plant(&self) -> Result<Plant> {
        Plant::new(self.config.plant_config(), self.world.clone(), self.config.start).config_err()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }
}
