//! The three top-level jobs: batch simulation, calibration and live serving.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use anyhow::Context;
use diffbot_core::bus::{Mode, RobotGraph};
use diffbot_core::control::{calibrate, CalibrationTable};
use diffbot_core::plant::{Plant, PlantRig};
use log::info;

use crate::bridge::{Bridge, BridgeConfig};
use crate::config::{parse_config, Scenario};
use crate::error::{ConfigContext, Failure, Result};
use crate::files::{export_map, write_calibration, Report};
use crate::pacing::{tick_interval, Pacer};
use crate::script::KeyScript;
use crate::trace::TraceWriter;

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Relative to the working directory, unlike the config's own `script`.
    pub script: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
}

/// Loads a config file, applies overrides and validates the result.
pub fn load(config_path: &Path, o: &Overrides) -> Result<Scenario> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))
        .config_err()?;
    let mut cfg = parse_config(&text, config_path)?;
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let cwd = std::env::current_dir().config_err()?;
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &o.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(script) = &o.script {
        cfg.script = Some(cwd.join(script));
    }
    if let Some(ui) = &o.ui_dir {
        cfg.ui_dir = Some(cwd.join(ui));
    }
    Scenario::from_config(cfg, base)
}

pub fn load_script(scenario: &Scenario) -> Result<KeyScript> {
    match &scenario.config.script {
        Some(p) => KeyScript::load(&scenario.resolve(p)).config_err(),
        None => Ok(KeyScript::default()),
    }
}

/// Plant, graph and trace files for a run.
struct Session {
    plant: Plant,
    graph: RobotGraph,
    traces: TraceWriter,
    out_dir: PathBuf,
}

impl Session {
    fn open(scenario: &Scenario) -> Result<Self> {
        let plant = scenario.plant()?;
        let graph = RobotGraph::new(scenario.graph.clone(), &plant).config_err()?;
        let out_dir = scenario.config.out_dir.clone();
        let beams = scenario.config.lidar.map_or(0, |l| l.beams as usize);
        let traces = TraceWriter::create(&out_dir.join("trace"), graph.registry(), beams).runtime_err()?;
        Ok(Self {
            plant,
            graph,
            traces,
            out_dir,
        })
    }

    fn step(&mut self) -> Result<Vec<diffbot_core::bus::Envelope>> {
        let log = self.graph.run_tick(&mut self.plant).runtime_err()?;
        self.traces.write(&log).runtime_err()?;
        Ok(log)
    }

    /// Flushes traces and writes the report and, in map mode, the map.
    fn finish(mut self) -> Result<Report> {
        self.traces.flush().runtime_err()?;
        let truth = self.plant.truth();
        let report = Report::new(
            self.graph.tick(),
            self.graph.time(),
            self.graph.odom_pose(),
            truth.pose,
            self.graph.estop_latched(),
            truth.collided,
        );
        report.write(&self.out_dir.join("report.json")).runtime_err()?;
        if let (Some(grid), Mode::Map { grid: gcfg, .. }) = (self.graph.grid(), &self.graph.config().mode) {
            export_map(grid, gcfg, &self.out_dir.join("map")).runtime_err()?;
        }
        Ok(report)
    }
}

/// Runs the scenario for its configured duration.
pub fn sim(scenario: &Scenario, script: &KeyScript) -> Result<Report> {
    let ticks = (scenario.config.duration / scenario.config.tick_dt).round() as u64;
    let mut s = Session::open(scenario)?;
    for t in 0..ticks {
        for ev in script.at(t) {
            s.graph.inject(*ev);
        }
        s.step()?;
    }
    s.finish()
}

/// Sweeps the configured plant and writes the table to `out`.
pub fn calibrate_plant(scenario: &Scenario, out: &Path) -> Result<CalibrationTable> {
    let mut plant = scenario.plant()?;
    let mut rig = PlantRig {
        plant: &mut plant,
        dt: scenario.config.tick_dt,
    };
    let table = calibrate(&mut rig, &scenario.config.calibration).runtime_err()?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .runtime_err()?;
    }
    write_calibration(out, &table).runtime_err()?;
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub port: u16,
    pub speed: f64,
}

/// Runs in real time with the bridge until `stop` is set. `ready` receives
/// the bound address before the first tick.
pub fn serve(
    scenario: &Scenario,
    script: &KeyScript,
    opts: &ServeOptions,
    stop: &AtomicBool,
    ready: impl FnOnce(SocketAddr),
) -> Result<Report> {
    let interval = tick_interval(scenario.config.tick_dt, opts.speed).map_err(Failure::config)?;
    let ui_dir = scenario.config.ui_dir.as_ref().map(|p| scenario.resolve(p));
    if let Some(dir) = &ui_dir {
        if !dir.is_dir() {
            return Err(Failure::config(format!("ui directory {} does not exist", dir.display())));
        }
    }
    let bridge = Bridge::bind(
        ("127.0.0.1", opts.port),
        BridgeConfig {
            ui_dir,
            ..Default::default()
        },
    )
    .with_context(|| format!("cannot listen on port {}", opts.port))
    .config_err()?;
    let mut s = Session::open(scenario)?;
    ready(bridge.local_addr());
    info!("serving on http://{}", bridge.local_addr());

    let pacer = Pacer::new(interval);
    let mut t = 0u64;
    while !stop.load(Ordering::Relaxed) {
        for ev in script.at(t).iter().copied().chain(bridge.take_inbound()) {
            s.graph.inject(ev);
        }
        let log = s.step()?;
        bridge.publish(&log);
        t += 1;
        pacer.wait(t);
    }
    bridge.shutdown();
    s.finish()
}
