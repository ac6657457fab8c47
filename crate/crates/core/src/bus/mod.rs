//! In-process publish/subscribe bus and the robot node graph that runs on it.
//!
//! Everything happens on one thread in a fixed order per tick, so a run is a
//! pure function of its configuration, seed and injected events.

mod graph;
mod nodes;

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::control::PwmPair;
use crate::error::Error;
use crate::kinematics::{Pose2D, Twist2D, WheelSpeeds};
use crate::odometry::EncoderSample;
use crate::plant::LidarScan;

pub use graph::{ControllerChoice, GraphConfig, Inbound, Mode, PoseSource, RobotGraph, TickSchedule, NODE_ORDER};
pub use nodes::{estop_node, tele_converter, wheel_speed_node, TeleopConfig};

/// Topic names used by the robot graph.
pub mod topic {
    pub const TELEOP_KEY: &str = "teleop_key";
    pub const CMD_VEL: &str = "cmd_vel";
    pub const WHEEL_TARGET: &str = "wheel_target";
    pub const PWM: &str = "pwm";
    pub const ENCODER: &str = "encoder";
    pub const ODOM: &str = "odom";
    pub const SCAN: &str = "scan";
    pub const ESTOP: &str = "estop";
    pub const ESTOP_RESET: &str = "estop_reset";
    pub const LED_STATUS: &str = "led_status";
    pub const GOAL: &str = "goal";
    pub const TRUE_POSE: &str = "true_pose";
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatusLed {
    Ok,
    Estop,
}

impl StatusLed {
    pub const fn as_str(&self) -> &'static str {
        match self {
            StatusLed::Ok => "ok",
            StatusLed::Estop => "estop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Key(char),
    Twist(Twist2D),
    Wheels(WheelSpeeds),
    Pwm(PwmPair),
    Encoder(EncoderSample),
    Odometry { pose: Pose2D, twist: Twist2D },
    Scan(LidarScan),
    Flag(bool),
    Trigger,
    Led(StatusLed),
    Pose(Pose2D),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PayloadKind {
    Key,
    Twist,
    Wheels,
    Pwm,
    Encoder,
    Odometry,
    Scan,
    Flag,
    Trigger,
    Led,
    Pose,
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::Key(_) => PayloadKind::Key,
            Payload::Twist(_) => PayloadKind::Twist,
            Payload::Wheels(_) => PayloadKind::Wheels,
            Payload::Pwm(_) => PayloadKind::Pwm,
            Payload::Encoder(_) => PayloadKind::Encoder,
            Payload::Odometry { .. } => PayloadKind::Odometry,
            Payload::Scan(_) => PayloadKind::Scan,
            Payload::Flag(_) => PayloadKind::Flag,
            Payload::Trigger => PayloadKind::Trigger,
            Payload::Led(_) => PayloadKind::Led,
            Payload::Pose(_) => PayloadKind::Pose,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub topic: String,
    pub tick: u64,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BusError {
    UndeclaredTopic(String),
    SchemaMismatch {
        topic: String,
        expected: PayloadKind,
        found: PayloadKind,
    },
    DuplicateTopic(String),
    UnknownSubscriber(usize),
    NodeFailure {
        node: &'static str,
        source: Error,
    },
}

impl fmt::Display for BusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BusError::UndeclaredTopic(t) => write!(f, "topic `{t}` is not declared"),
            BusError::SchemaMismatch { topic, expected, found } => {
                write!(f, "topic `{topic}` carries {expected:?} payloads, got {found:?}")
            }
            BusError::DuplicateTopic(t) => write!(f, "topic `{t}` declared twice with different schemas"),
            BusError::UnknownSubscriber(id) => write!(f, "no subscriber with id {id}"),
            BusError::NodeFailure { node, source } => write!(f, "node `{node}` failed: {source}"),
        }
    }
}

impl core::error::Error for BusError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            BusError::NodeFailure { source, .. } => Some(source),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SubscriberId(usize);

#[derive(Debug, Clone)]
struct TopicEntry {
    kind: PayloadKind,
    subscribers: Vec<SubscriberId>,
    latest: Option<Envelope>,
}

#[derive(Debug, Clone)]
struct Subscriber {
    name: String,
    inbox: VecDeque<Envelope>,
}

/// Topic table with typed schemas, per-subscriber FIFO inboxes and a log of
/// everything published since the last [`TopicRegistry::take_log`].
#[derive(Debug, Clone, Default)]
pub struct TopicRegistry {
    topics: BTreeMap<String, TopicEntry>,
    subscribers: Vec<Subscriber>,
    log: Vec<Envelope>,
}

impl TopicRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with every topic the robot graph uses.
    pub fn standard() -> Self {
        let mut r = Self::new();
        for (name, kind) in [
            (topic::TELEOP_KEY, PayloadKind::Key),
            (topic::CMD_VEL, PayloadKind::Twist),
            (topic::WHEEL_TARGET, PayloadKind::Wheels),
            (topic::PWM, PayloadKind::Pwm),
            (topic::ENCODER, PayloadKind::Encoder),
            (topic::ODOM, PayloadKind::Odometry),
            (topic::SCAN, PayloadKind::Scan),
            (topic::ESTOP, PayloadKind::Flag),
            (topic::ESTOP_RESET, PayloadKind::Trigger),
            (topic::LED_STATUS, PayloadKind::Led),
            (topic::GOAL, PayloadKind::Pose),
            (topic::TRUE_POSE, PayloadKind::Pose),
        ] {
            r.declare(name, kind).expect("standard topics are distinct");
        }
        r
    }

    /// Declares a topic. Re-declaring with the same schema is a no-op.
    pub fn declare(&mut self, name: &str, kind: PayloadKind) -> Result<(), BusError> {
        if name.is_empty() {
            return Err(BusError::UndeclaredTopic(String::new()));
        }
        match self.topics.get(name) {
            Some(e) if e.kind == kind => Ok(()),
            Some(_) => Err(BusError::DuplicateTopic(name.into())),
            None => {
                self.topics.insert(
                    name.into(),
                    TopicEntry {
                        kind,
                        subscribers: Vec::new(),
                        latest: None,
                    },
                );
                Ok(())
            }
        }
    }

    pub fn schema(&self, name: &str) -> Option<PayloadKind> {
        self.topics.get(name).map(|e| e.kind)
    }

    pub fn topic_names(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    /// Creates a subscriber with an empty inbox.
    pub fn add_subscriber(&mut self, name: &str) -> SubscriberId {
        self.subscribers.push(Subscriber {
            name: name.into(),
            inbox: VecDeque::new(),
        });
        SubscriberId(self.subscribers.len() - 1)
    }

    pub fn subscriber_name(&self, id: SubscriberId) -> Option<&str> {
        self.subscribers.get(id.0).map(|s| s.name.as_str())
    }

    /// Routes `topic` into the inbox of `id`. Subscribers of a topic are
    /// served in the order they subscribed.
    pub fn subscribe(&mut self, id: SubscriberId, name: &str) -> Result<(), BusError> {
        if id.0 >= self.subscribers.len() {
            return Err(BusError::UnknownSubscriber(id.0));
        }
        let entry = self.topics.get_mut(name).ok_or_else(|| BusError::UndeclaredTopic(name.into()))?;
        if !entry.subscribers.contains(&id) {
            entry.subscribers.push(id);
        }
        Ok(())
    }

    /// Validates and delivers a payload to every subscriber immediately.
    pub fn publish(&mut self, name: &str, payload: Payload, tick: u64) -> Result<(), BusError> {
        let entry = self.topics.get_mut(name).ok_or_else(|| BusError::UndeclaredTopic(name.into()))?;
        if payload.kind() != entry.kind {
            return Err(BusError::SchemaMismatch {
                topic: name.into(),
                expected: entry.kind,
                found: payload.kind(),
            });
        }
        let env = Envelope {
            topic: name.into(),
            tick,
            payload,
        };
        for id in &entry.subscribers {
            self.subscribers[id.0].inbox.push_back(env.clone());
        }
        entry.latest = Some(env.clone());
        self.log.push(env);
        Ok(())
    }

    /// Removes and returns everything waiting for `id`, oldest first.
    pub fn drain(&mut self, id: SubscriberId) -> Vec<Envelope> {
        match self.subscribers.get_mut(id.0) {
            Some(s) => s.inbox.drain(..).collect(),
            None => Vec::new(),
        }
    }

    pub fn latest(&self, name: &str) -> Option<&Envelope> {
        self.topics.get(name).and_then(|e| e.latest.as_ref())
    }

    /// Everything published since the previous call, in publish order.
    pub fn take_log(&mut self) -> Vec<Envelope> {
        core::mem::take(&mut self.log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn publish_declared_topic() {
        let mut r = TopicRegistry::standard();
        assert!(r.publish(topic::CMD_VEL, Payload::Twist(Twist2D::ZERO), 0).is_ok());
        assert_eq!(r.latest(topic::CMD_VEL).unwrap().tick, 0);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let mut r = TopicRegistry::standard();
        let err = r
            .publish(topic::CMD_VEL, Payload::Encoder(EncoderSample::new(1, 1, 0.1)), 3)
            .unwrap_err();
        assert_eq!(
            err,
            BusError::SchemaMismatch {
                topic: "cmd_vel".into(),
                expected: PayloadKind::Twist,
                found: PayloadKind::Encoder,
            }
        );
        assert!(r.latest(topic::CMD_VEL).is_none());
        assert!(r.take_log().is_empty());
    }

    #[test]
    fn undeclared_topic_is_rejected() {
        let mut r = TopicRegistry::new();
        assert_eq!(
            r.publish("cmd_vel", Payload::Twist(Twist2D::ZERO), 0),
            Err(BusError::UndeclaredTopic("cmd_vel".into()))
        );
        assert!(r.declare("", PayloadKind::Twist).is_err());
        r.declare("cmd_vel", PayloadKind::Twist).unwrap();
        assert!(r.declare("cmd_vel", PayloadKind::Twist).is_ok());
        assert!(r.declare("cmd_vel", PayloadKind::Pose).is_err());
    }

    #[test]
    fn fan_out_in_registration_order() {
        let mut r = TopicRegistry::standard();
        let a = r.add_subscriber("a");
        let b = r.add_subscriber("b");
        r.subscribe(a, topic::CMD_VEL).unwrap();
        r.subscribe(b, topic::CMD_VEL).unwrap();
        let t1 = Twist2D::new(0.3, 0.0, 0.0);
        let t2 = Twist2D::new(0.0, 0.0, 1.0);
        r.publish(topic::CMD_VEL, Payload::Twist(t1), 7).unwrap();
        r.publish(topic::CMD_VEL, Payload::Twist(t2), 7).unwrap();
        let (ga, gb) = (r.drain(a), r.drain(b));
        assert_eq!(ga, gb);
        assert_eq!(ga.len(), 2);
        assert_eq!(ga[0].payload, Payload::Twist(t1));
        assert_eq!(ga[1].payload, Payload::Twist(t2));
        assert!(r.drain(a).is_empty());
        assert_eq!(r.take_log().len(), 2);
    }

    #[test]
    fn inbox_merges_topics_in_publish_order() {
        let mut r = TopicRegistry::standard();
        let s = r.add_subscriber("s");
        r.subscribe(s, topic::ESTOP).unwrap();
        r.subscribe(s, topic::CMD_VEL).unwrap();
        r.publish(topic::CMD_VEL, Payload::Twist(Twist2D::ZERO), 1).unwrap();
        r.publish(topic::ESTOP, Payload::Flag(true), 1).unwrap();
        let got: Vec<_> = r.drain(s).into_iter().map(|e| e.topic).collect();
        assert_eq!(got, ["cmd_vel", "estop"]);
        assert_eq!(r.subscribe(SubscriberId(9), topic::ESTOP), Err(BusError::UnknownSubscriber(9)));
    }
}
