use diffbot_core::bus::{topic, GraphConfig, Inbound, Mode, Payload, RobotGraph, StatusLed};
use diffbot_core::autonomy::{GoToPoseParams, GoalPhase};
use diffbot_core::plant::{Plant, PlantConfig, Polygon, World};
use diffbot_core::Pose2D;

fn quiet() -> GraphConfig {
    GraphConfig {
        lidar: None,
        ..Default::default()
    }
}

fn setup(cfg: GraphConfig, world: World) -> (RobotGraph, Plant) {
    let plant = Plant::new(PlantConfig::default(), world, Pose2D::default()).unwrap();
    let graph = RobotGraph::new(cfg, &plant).unwrap();
    (graph, plant)
}

fn pwm_of(log: &[diffbot_core::bus::Envelope]) -> (i32, i32) {
    log.iter()
        .find_map(|e| match e.payload {
            Payload::Pwm(p) if e.topic == topic::PWM => Some((p.left(), p.right())),
            _ => None,
        })
        .unwrap()
}

#[test]
fn idle_graph_stays_at_rest() {
    let (mut g, mut plant) = setup(quiet(), World::empty(2.0));
    for _ in 0..50 {
        let log = g.run_tick(&mut plant).unwrap();
        assert_eq!(pwm_of(&log), (0, 0));
        let odom = log.iter().find(|e| e.topic == topic::ODOM).unwrap();
        assert_eq!(
            odom.payload,
            Payload::Odometry {
                pose: Pose2D::default(),
                twist: Default::default()
            }
        );
    }
    assert_eq!(plant.truth().pose, Pose2D::default());
    assert_eq!(g.tick(), 50);
}

#[test]
fn slot_order_within_a_tick() {
    let (mut g, mut plant) = setup(quiet(), World::empty(2.0));
    g.inject(Inbound::Key('w'));
    let log = g.run_tick(&mut plant).unwrap();
    let topics: Vec<&str> = log.iter().map(|e| e.topic.as_str()).collect();
    assert_eq!(
        topics,
        [
            "teleop_key",
            "estop",
            "led_status",
            "cmd_vel",
            "wheel_target",
            "pwm",
            "encoder",
            "true_pose",
            "odom"
        ]
    );
    assert!(log.iter().all(|e| e.tick == 0));
}

#[test]
fn key_reaches_plant_on_next_controller_tick() {
    let (mut g, mut plant) = setup(quiet(), World::empty(2.0));
    g.inject(Inbound::Key('w'));
    let log = g.run_tick(&mut plant).unwrap();
    let (l, r) = pwm_of(&log);
    assert!(l > 0 && l == r);

    let (mut g, mut plant) = setup(quiet(), World::empty(2.0));
    for _ in 0..3 {
        g.run_tick(&mut plant).unwrap();
    }
    g.inject(Inbound::Key('w'));
    for t in 3..5 {
        let log = g.run_tick(&mut plant).unwrap();
        assert_eq!(pwm_of(&log), (0, 0), "tick {t}");
    }
    let log = g.run_tick(&mut plant).unwrap();
    assert!(pwm_of(&log).0 > 0);
}

#[test]
fn unmapped_key_publishes_nothing() {
    let (mut g, mut plant) = setup(quiet(), World::empty(2.0));
    g.inject(Inbound::Key('q'));
    let log = g.run_tick(&mut plant).unwrap();
    assert!(log.iter().any(|e| e.topic == topic::TELEOP_KEY));
    assert!(!log.iter().any(|e| e.topic == topic::CMD_VEL));
}

#[test]
fn straight_teleop_odometry_tracks_truth() {
    let (mut g, mut plant) = setup(quiet(), World::empty(5.0));
    g.inject(Inbound::Key('w'));
    for _ in 0..500 {
        g.run_tick(&mut plant).unwrap();
    }
    let truth = plant.truth().pose;
    let odom = g.odom_pose();
    assert!(truth.x > 2.5, "robot moved {}", truth.x);
    let per_tick = PlantConfig::default().encoder.meters_per_tick();
    assert!(odom.distance_to(&truth) < per_tick, "{odom:?} vs {truth:?}");
    assert_eq!(odom.theta, 0.0);
}

#[test]
fn closed_loop_speed_settles() {
    let (mut g, mut plant) = setup(quiet(), World::empty(5.0));
    g.inject(Inbound::Key('w'));
    let mut x_at = Vec::new();
    for t in 0..250u64 {
        g.run_tick(&mut plant).unwrap();
        if t >= 75 {
            let v = plant.truth().wheel_speeds_actual;
            let vx = (v.left + v.right) / 2.0;
            assert!((vx - 0.3).abs() <= 0.015, "tick {t}: vx {vx}");
            x_at.push(g.odom_twist().vx);
        }
    }
    // Encoder-measured speed, averaged over each control period.
    for chunk in x_at.chunks(5) {
        let mean = chunk.iter().sum::<f64>() / chunk.len() as f64;
        assert!((mean - 0.3).abs() <= 0.015, "measured {mean}");
    }
}

#[test]
fn estop_zeroes_pwm_on_detection_tick_and_latches() {
    let mut world = World::empty(3.0);
    world.cliffs.push(Polygon(vec![[0.5, -1.0], [2.0, -1.0], [2.0, 1.0], [0.5, 1.0]]));
    let (mut g, mut plant) = setup(quiet(), world);
    g.inject(Inbound::Key('w'));
    let mut detected = None;
    for t in 0..400u64 {
        let cliff = plant.cliff_ahead();
        let log = g.run_tick(&mut plant).unwrap();
        if cliff && detected.is_none() {
            detected = Some(t);
            assert_eq!(pwm_of(&log), (0, 0));
            assert!(log
                .iter()
                .any(|e| e.topic == topic::LED_STATUS && e.payload == Payload::Led(StatusLed::Estop)));
            assert!(log
                .iter()
                .any(|e| e.topic == topic::WHEEL_TARGET && e.payload == Payload::Wheels(Default::default())));
        }
        if detected.is_some() {
            assert_eq!(pwm_of(&log), (0, 0), "tick {t}");
            assert!(g.estop_latched());
        }
        if t > 0 && detected.is_none() && t % 5 == 0 {
            assert!(pwm_of(&log).0 > 0);
        }
    }
    assert!(detected.is_some());

    g.inject(Inbound::Key('w'));
    g.run_tick(&mut plant).unwrap();
    assert!(g.estop_latched(), "commands do not clear the latch");
}

#[test]
fn reset_restores_passthrough_once_clear() {
    // A thin strip: the robot coasts past it after the stop.
    let mut world = World::empty(3.0);
    world.cliffs.push(Polygon(vec![[0.5, -1.0], [0.52, -1.0], [0.52, 1.0], [0.5, 1.0]]));
    let (mut g, mut plant) = setup(quiet(), world);
    g.inject(Inbound::Key('w'));
    while !g.estop_latched() {
        g.run_tick(&mut plant).unwrap();
    }
    for _ in 0..100 {
        g.run_tick(&mut plant).unwrap();
        assert!(g.estop_latched());
    }
    assert!(!plant.cliff_ahead());
    let stopped = plant.truth().pose.x;

    g.inject(Inbound::EstopReset);
    let log = g.run_tick(&mut plant).unwrap();
    assert!(!g.estop_latched());
    assert!(log.iter().any(|e| e.payload == Payload::Led(StatusLed::Ok)));
    // The command from before the stop is not resumed.
    for _ in 0..20 {
        g.run_tick(&mut plant).unwrap();
    }
    assert!((plant.truth().pose.x - stopped).abs() < 1e-5);

    g.inject(Inbound::Key('w'));
    for _ in 0..50 {
        g.run_tick(&mut plant).unwrap();
    }
    assert!(plant.truth().pose.x > stopped + 0.05);
}

#[test]
fn runs_are_deterministic() {
    let run = || {
        let cfg = GraphConfig::default();
        let mut plant_cfg = PlantConfig::default();
        plant_cfg.left_motor.noise_std = 0.05;
        plant_cfg.right_motor.noise_std = 0.05;
        plant_cfg.seed = 11;
        let mut plant = Plant::new(plant_cfg, World::empty(3.0), Pose2D::default()).unwrap();
        let mut g = RobotGraph::new(cfg, &plant).unwrap();
        let mut all = Vec::new();
        for t in 0..200u64 {
            match t {
                0 => g.inject(Inbound::Key('w')),
                60 => g.inject(Inbound::Key('a')),
                120 => g.inject(Inbound::Key(' ')),
                _ => {}
            }
            all.extend(g.run_tick(&mut plant).unwrap());
        }
        all
    };
    assert_eq!(run(), run());
}

#[test]
fn scans_follow_scan_rate() {
    let (mut g, mut plant) = setup(GraphConfig::default(), World::empty(2.0));
    let mut scans = 0;
    for _ in 0..500 {
        let log = g.run_tick(&mut plant).unwrap();
        scans += log.iter().filter(|e| e.topic == topic::SCAN).count();
    }
    // 10 s at 5.5 Hz, including the scan at t = 0.
    assert_eq!(scans, 55);
}

#[test]
fn goto_reaches_injected_goal() {
    let cfg = GraphConfig {
        mode: Mode::GoTo {
            goal: None,
            pos_tolerance: 0.05,
            heading_tolerance: 0.1,
            params: GoToPoseParams::default(),
        },
        ..quiet()
    };
    let (mut g, mut plant) = setup(cfg, World::empty(5.0));
    g.run_tick(&mut plant).unwrap();
    assert!(g.goal_phase().is_none());
    g.inject(Inbound::Goal(Pose2D::new(1.0, 1.0, 1.0)));
    let mut t = 0;
    while g.goal_phase() != Some(GoalPhase::Arrived) {
        g.run_tick(&mut plant).unwrap();
        t += 1;
        assert!(t < 3000, "goal not reached");
    }
    let truth = plant.truth().pose;
    assert!(truth.distance_to(&Pose2D::new(1.0, 1.0, 0.0)) < 0.06);
}

#[test]
fn map_mode_builds_grid() {
    let cfg = GraphConfig {
        mode: Mode::Map {
            grid: Default::default(),
            pose_source: Default::default(),
        },
        ..Default::default()
    };
    let mut world = World::empty(2.2);
    world.walls.push(diffbot_core::plant::Segment([1.0, -1.0], [1.0, 1.0]));
    let (mut g, mut plant) = setup(cfg, world);
    for _ in 0..20 {
        g.run_tick(&mut plant).unwrap();
    }
    let grid = g.grid().unwrap();
    let (cx, cy) = grid.cell_of([1.0, 0.0]).unwrap();
    assert!(grid.get(cx, cy) > 0.0);
    let (fx, fy) = grid.cell_of([0.5, 0.0]).unwrap();
    assert!(grid.get(fx, fy) < 0.0);
}

#[test]
fn config_validation() {
    let world = World::empty(2.0);
    let plant = Plant::new(PlantConfig::default(), world, Pose2D::default()).unwrap();
    let mut cfg = GraphConfig::default();
    cfg.schedule.control_period_ticks = 3;
    assert!(RobotGraph::new(cfg, &plant).is_err());
    let mut cfg = GraphConfig::default();
    cfg.schedule.dt = 0.0;
    assert!(RobotGraph::new(cfg, &plant).is_err());
    let cfg = GraphConfig {
        lidar: None,
        mode: Mode::Map {
            grid: Default::default(),
            pose_source: Default::default(),
        },
        ..Default::default()
    };
    assert!(RobotGraph::new(cfg, &plant).is_err());
}
