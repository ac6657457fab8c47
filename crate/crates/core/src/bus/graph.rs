//! The robot node graph: fixed-order node slots driven one tick at a time.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use libm::floor;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::nodes::{estop_node, tele_converter, wheel_speed_node, TeleopConfig};
use super::{topic, BusError, Envelope, Payload, StatusLed, SubscriberId, TopicRegistry};
use crate::autonomy::{go_to_pose, goal_phase, grid_update, GoToPoseParams, GoalPhase, GoalSpec, GridConfig, OccupancyGrid};
use crate::control::{pid_step, segmented_lookup, CalibrationTable, PidGains, PidState, PwmPair};
use crate::error::{ensure_positive, Error};
use crate::kinematics::{synthesize, ChassisGeometry, Pose2D, Twist2D, WheelSpeeds};
use crate::odometry::{step as odom_step, ticks_to_wheel_speed, EncoderConfig, EncoderSample};
use crate::plant::{LidarConfig, Plant};

/// Node slots in execution order. Failures report one of these names.
pub const NODE_ORDER: [&str; 8] = [
    "sources",
    "estop",
    "tele_converter",
    "wheel_speed",
    "controller",
    "launchpad",
    "odom",
    "flush",
];

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickSchedule {
    pub dt: f64,
    /// The controller runs on ticks that are a multiple of this.
    pub control_period_ticks: u32,
}

impl Default for TickSchedule {
    fn default() -> Self {
        Self {
            dt: 0.02,
            control_period_ticks: 5,
        }
    }
}

impl TickSchedule {
    pub fn validate(&self) -> Result<(), Error> {
        ensure_positive(self.dt, "tick dt must be positive")?;
        if self.control_period_ticks == 0 {
            return Err(Error::InvalidArgument("control period must be at least one tick"));
        }
        Ok(())
    }

    pub fn control_period(&self) -> f64 {
        self.dt * self.control_period_ticks as f64
    }

    pub fn control_due(&self, tick: u64) -> bool {
        tick % self.control_period_ticks as u64 == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerChoice {
    Pid(PidGains),
    Segmented(CalibrationTable),
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoseSource {
    #[default]
    Truth,
    Odometry,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Teleop,
    /// Drives toward the current goal using the odometry pose.
    GoTo {
        goal: Option<Pose2D>,
        pos_tolerance: f64,
        heading_tolerance: f64,
        params: GoToPoseParams,
    },
    /// Teleop plus a mapper fed by every lidar scan.
    Map { grid: GridConfig, pose_source: PoseSource },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    pub schedule: TickSchedule,
    pub geometry: ChassisGeometry,
    pub encoder: EncoderConfig,
    pub v_wheel_max: f64,
    pub teleop: TeleopConfig,
    pub controller: ControllerChoice,
    pub lidar: Option<LidarConfig>,
    pub mode: Mode,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            schedule: TickSchedule::default(),
            geometry: ChassisGeometry::default(),
            encoder: EncoderConfig::default(),
            v_wheel_max: 0.6,
            teleop: TeleopConfig::default(),
            controller: ControllerChoice::Pid(PidGains::default()),
            lidar: Some(LidarConfig::default()),
            mode: Mode::Teleop,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.schedule.validate()?;
        self.geometry.validate()?;
        self.encoder.validate()?;
        ensure_positive(self.v_wheel_max, "v_wheel_max must be positive")?;
        if let ControllerChoice::Pid(g) = &self.controller {
            g.validate()?;
            if (g.sample_time - self.schedule.control_period()).abs() > 1e-9 {
                return Err(Error::InvalidArgument("pid sample time must equal the control period"));
            }
        }
        if let Some(l) = &self.lidar {
            l.validate()?;
        }
        match &self.mode {
            Mode::Teleop => {}
            Mode::GoTo {
                goal,
                pos_tolerance,
                heading_tolerance,
                ..
            } => GoalSpec {
                goal: goal.unwrap_or_default(),
                pos_tolerance: *pos_tolerance,
                heading_tolerance: *heading_tolerance,
            }
            .validate()?,
            Mode::Map { grid, .. } => {
                grid.validate()?;
                if self.lidar.is_none() {
                    return Err(Error::InvalidArgument("map mode needs a lidar"));
                }
            }
        }
        Ok(())
    }
}

/// Events from outside the graph. They take effect at the start of the next
/// tick, in arrival order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Inbound {
    Key(char),
    EstopReset,
    Goal(Pose2D),
}

#[derive(Debug, Clone, Copy)]
struct Subs {
    goto: SubscriberId,
    estop: SubscriberId,
    tele: SubscriberId,
    wheel: SubscriberId,
    controller: SubscriberId,
    odom: SubscriberId,
}

#[derive(Debug, Clone)]
pub struct RobotGraph {
    cfg: GraphConfig,
    registry: TopicRegistry,
    subs: Subs,
    tick: u64,
    inbound: VecDeque<Inbound>,
    // estop node
    latch: bool,
    led: Option<StatusLed>,
    // wheel_speed node
    cmd: Twist2D,
    wheel_latched: bool,
    // controller node
    target: WheelSpeeds,
    ctrl_latched: bool,
    pwm: PwmPair,
    pid: [PidState; 2],
    enc_ticks: [i64; 2],
    enc_time: f64,
    // odom node
    pose: Pose2D,
    twist: Twist2D,
    // autonomy
    goal: Option<GoalSpec>,
    grid: Option<OccupancyGrid>,
    last_scan: Option<u64>,
}

fn node_err(node: &'static str) -> impl Fn(Error) -> BusError {
    move |source| BusError::NodeFailure { node, source }
}

impl RobotGraph {
    /// Builds the graph for `plant`. Odometry starts at the plant's true pose.
    pub fn new(cfg: GraphConfig, plant: &Plant) -> Result<Self, Error> {
        cfg.validate()?;
        let mut registry = TopicRegistry::standard();
        let mut sub = |name: &str, topics: &[&str]| {
            let id = registry.add_subscriber(name);
            for t in topics {
                registry.subscribe(id, t).expect("standard topic");
            }
            id
        };
        let subs = Subs {
            goto: sub("goto", &[topic::GOAL]),
            estop: sub("estop", &[topic::ESTOP_RESET]),
            tele: sub("tele_converter", &[topic::TELEOP_KEY]),
            wheel: sub("wheel_speed", &[topic::CMD_VEL, topic::ESTOP]),
            controller: sub("controller", &[topic::WHEEL_TARGET, topic::ESTOP, topic::ENCODER]),
            odom: sub("odom", &[topic::ENCODER]),
        };
        let (goal, grid) = match &cfg.mode {
            Mode::Teleop => (None, None),
            Mode::GoTo {
                goal,
                pos_tolerance,
                heading_tolerance,
                ..
            } => (
                goal.map(|g| GoalSpec {
                    goal: g,
                    pos_tolerance: *pos_tolerance,
                    heading_tolerance: *heading_tolerance,
                }),
                None,
            ),
            Mode::Map { grid, .. } => (None, Some(OccupancyGrid::covering(&plant.world().bounds, grid)?)),
        };
        Ok(Self {
            cfg,
            registry,
            subs,
            tick: 0,
            inbound: VecDeque::new(),
            latch: false,
            led: None,
            cmd: Twist2D::ZERO,
            wheel_latched: false,
            target: WheelSpeeds::ZERO,
            ctrl_latched: false,
            pwm: PwmPair::ZERO,
            pid: [PidState::default(); 2],
            enc_ticks: [0; 2],
            enc_time: 0.0,
            pose: plant.truth().pose,
            twist: Twist2D::ZERO,
            goal,
            grid,
            last_scan: None,
        })
    }

    pub fn config(&self) -> &GraphConfig {
        &self.cfg
    }

    /// Index of the next tick to run.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.schedule.dt
    }

    pub fn registry(&self) -> &TopicRegistry {
        &self.registry
    }

    pub fn registry_mut(&mut self) -> &mut TopicRegistry {
        &mut self.registry
    }

    pub fn inject(&mut self, event: Inbound) {
        self.inbound.push_back(event);
    }

    pub fn odom_pose(&self) -> Pose2D {
        self.pose
    }

    pub fn odom_twist(&self) -> Twist2D {
        self.twist
    }

    /// Resets the odometry estimate, e.g. to an externally known pose.
    pub fn correct_odometry(&mut self, pose: Pose2D) {
        self.pose = pose;
    }

    pub fn estop_latched(&self) -> bool {
        self.latch
    }

    pub fn wheel_target(&self) -> WheelSpeeds {
        self.target
    }

    pub fn pwm(&self) -> PwmPair {
        self.pwm
    }

    pub fn goal(&self) -> Option<&GoalSpec> {
        self.goal.as_ref()
    }

    /// Progress toward the current goal as seen by odometry.
    pub fn goal_phase(&self) -> Option<GoalPhase> {
        self.goal.as_ref().map(|g| goal_phase(&self.pose, g))
    }

    pub fn grid(&self) -> Option<&OccupancyGrid> {
        self.grid.as_ref()
    }

    /// Runs every node slot once and returns the envelopes published during
    /// the tick, in publish order.
    pub fn run_tick(&mut self, plant: &mut Plant) -> Result<Vec<Envelope>, BusError> {
        let result = self.run_slots(plant);
        let log = self.registry.take_log();
        result?;
        self.tick += 1;
        Ok(log)
    }

    fn run_slots(&mut self, plant: &mut Plant) -> Result<(), BusError> {
        self.sources(plant)?;
        self.estop(plant)?;
        self.tele_converter()?;
        self.wheel_speed()?;
        self.controller()?;
        self.launchpad(plant)?;
        self.odom()
    }

    fn publish(&mut self, name: &str, payload: Payload) -> Result<(), BusError> {
        self.registry.publish(name, payload, self.tick)
    }

    fn sources(&mut self, plant: &Plant) -> Result<(), BusError> {
        while let Some(ev) = self.inbound.pop_front() {
            match ev {
                Inbound::Key(c) => self.publish(topic::TELEOP_KEY, Payload::Key(c))?,
                Inbound::EstopReset => self.publish(topic::ESTOP_RESET, Payload::Trigger)?,
                Inbound::Goal(p) => self.publish(topic::GOAL, Payload::Pose(p))?,
            }
        }

        if let Some(lidar) = self.cfg.lidar {
            let index = floor(self.tick as f64 * self.cfg.schedule.dt * lidar.scan_rate) as u64;
            if self.last_scan != Some(index) {
                self.last_scan = Some(index);
                let scan = plant.lidar(&lidar);
                if let (Some(grid), Mode::Map { grid: gcfg, pose_source }) = (self.grid.as_mut(), &self.cfg.mode) {
                    let pose = match pose_source {
                        PoseSource::Truth => plant.truth().pose,
                        PoseSource::Odometry => self.pose,
                    };
                    grid_update(grid, &pose, &scan, gcfg);
                }
                self.publish(topic::SCAN, Payload::Scan(scan))?;
            }
        }

        let goals = self.registry.drain(self.subs.goto);
        if let Mode::GoTo {
            pos_tolerance,
            heading_tolerance,
            params,
            ..
        } = self.cfg.mode
        {
            for env in goals {
                if let Payload::Pose(p) = env.payload {
                    let spec = GoalSpec {
                        goal: p,
                        pos_tolerance,
                        heading_tolerance,
                    };
                    spec.validate().map_err(node_err("sources"))?;
                    self.goal = Some(spec);
                }
            }
            if let Some(spec) = self.goal {
                let twist = go_to_pose(&self.pose, &spec, &params);
                self.publish(topic::CMD_VEL, Payload::Twist(twist))?;
            }
        }
        Ok(())
    }

    fn estop(&mut self, plant: &Plant) -> Result<(), BusError> {
        let reset = self
            .registry
            .drain(self.subs.estop)
            .iter()
            .any(|e| e.payload == Payload::Trigger);
        let (_, latch) = estop_node(plant.cliff_ahead(), self.latch, reset);
        self.latch = latch;
        self.publish(topic::ESTOP, Payload::Flag(latch))?;
        let led = if latch { StatusLed::Estop } else { StatusLed::Ok };
        if self.led != Some(led) {
            self.led = Some(led);
            self.publish(topic::LED_STATUS, Payload::Led(led))?;
        }
        Ok(())
    }

    fn tele_converter(&mut self) -> Result<(), BusError> {
        for env in self.registry.drain(self.subs.tele) {
            if let Payload::Key(c) = env.payload {
                if let Some(twist) = tele_converter(c, &self.cfg.teleop) {
                    self.publish(topic::CMD_VEL, Payload::Twist(twist))?;
                }
            }
        }
        Ok(())
    }

    fn wheel_speed(&mut self) -> Result<(), BusError> {
        for env in self.registry.drain(self.subs.wheel) {
            match env.payload {
                Payload::Twist(t) => self.cmd = t,
                Payload::Flag(f) => self.wheel_latched = f,
                _ => {}
            }
        }
        let target = if self.wheel_latched {
            // Forget the last command so a reset does not resume motion.
            self.cmd = Twist2D::ZERO;
            WheelSpeeds::ZERO
        } else {
            wheel_speed_node(&self.cmd, &self.cfg.geometry, self.cfg.v_wheel_max)
        };
        self.publish(topic::WHEEL_TARGET, Payload::Wheels(target))
    }

    fn controller(&mut self) -> Result<(), BusError> {
        for env in self.registry.drain(self.subs.controller) {
            match env.payload {
                Payload::Wheels(w) => self.target = w,
                Payload::Flag(f) => self.ctrl_latched = f,
                Payload::Encoder(s) => {
                    self.enc_ticks[0] += s.delta_ticks_left;
                    self.enc_ticks[1] += s.delta_ticks_right;
                    self.enc_time += s.dt;
                }
                _ => {}
            }
        }

        if self.ctrl_latched {
            self.pwm = PwmPair::ZERO;
            self.pid = [PidState::default(); 2];
        } else if self.cfg.schedule.control_due(self.tick) {
            let err = node_err("controller");
            self.pwm = match &self.cfg.controller {
                ControllerChoice::Pid(gains) => {
                    let measured = if self.enc_time > 0.0 {
                        let s = EncoderSample::new(self.enc_ticks[0], self.enc_ticks[1], self.enc_time);
                        ticks_to_wheel_speed(&s, &self.cfg.encoder).map_err(&err)?
                    } else {
                        WheelSpeeds::ZERO
                    };
                    let (l, sl) = pid_step(&self.pid[0], gains, self.target.left, measured.left).map_err(&err)?;
                    let (r, sr) = pid_step(&self.pid[1], gains, self.target.right, measured.right).map_err(&err)?;
                    self.pid = [sl, sr];
                    PwmPair::saturating(l, r)
                }
                ControllerChoice::Segmented(table) => {
                    let l = segmented_lookup(&table.left, self.target.left).map_err(&err)?;
                    let r = segmented_lookup(&table.right, self.target.right).map_err(&err)?;
                    PwmPair::saturating(l, r)
                }
            };
        } else {
            return self.publish(topic::PWM, Payload::Pwm(self.pwm));
        }
        self.enc_ticks = [0; 2];
        self.enc_time = 0.0;
        self.publish(topic::PWM, Payload::Pwm(self.pwm))
    }

    fn launchpad(&mut self, plant: &mut Plant) -> Result<(), BusError> {
        let sample = plant.step(self.pwm, self.cfg.schedule.dt).map_err(node_err("launchpad"))?;
        self.publish(topic::ENCODER, Payload::Encoder(sample))?;
        self.publish(topic::TRUE_POSE, Payload::Pose(plant.truth().pose))
    }

    fn odom(&mut self) -> Result<(), BusError> {
        let err = node_err("odom");
        for env in self.registry.drain(self.subs.odom) {
            if let Payload::Encoder(s) = env.payload {
                let wheels = ticks_to_wheel_speed(&s, &self.cfg.encoder).map_err(&err)?;
                self.pose = odom_step(&self.pose, &wheels, &self.cfg.geometry, s.dt).map_err(&err)?;
                self.twist = synthesize(&wheels, &self.cfg.geometry);
            }
        }
        self.publish(
            topic::ODOM,
            Payload::Odometry {
                pose: self.pose,
                twist: self.twist,
            },
        )
    }
}
