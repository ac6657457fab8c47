//! JSON text frames exchanged with bridge clients.
//!
//! Outbound: `{"topic": "odom", "tick": 12, "data": {...}}`, one envelope per
//! frame. Inbound: `teleop_key`, `estop_reset`, `goal` and `subscribe`.

use std::collections::BTreeSet;

use diffbot_core::bus::{topic, Envelope, Inbound, Payload};
use diffbot_core::Pose2D;
use serde::Deserialize;
use serde_json::{json, Value};

/// Topic of the frames the bridge itself emits.
pub const ERROR_TOPIC: &str = "error";
pub const DROPS_TOPIC: &str = "bridge_drops";

pub fn payload_json(payload: &Payload) -> Value {
    match payload {
        Payload::Key(c) => json!({ "key": c.to_string() }),
        Payload::Twist(t) => json!(t),
        Payload::Wheels(w) => json!(w),
        Payload::Pwm(p) => json!(p),
        Payload::Encoder(s) => json!(s),
        Payload::Odometry { pose, twist } => json!({ "pose": pose, "twist": twist }),
        Payload::Scan(s) => json!(s),
        Payload::Flag(b) => json!({ "active": b }),
        Payload::Trigger => json!({}),
        Payload::Led(l) => json!({ "status": l }),
        Payload::Pose(p) => json!(p),
    }
}

pub fn encode(env: &Envelope) -> String {
    json!({ "topic": env.topic, "tick": env.tick, "data": payload_json(&env.payload) }).to_string()
}

pub fn error_frame(tick: u64, message: &str) -> String {
    json!({ "topic": ERROR_TOPIC, "tick": tick, "data": { "message": message } }).to_string()
}

pub fn drops_frame(tick: u64, dropped: u64) -> String {
    json!({ "topic": DROPS_TOPIC, "tick": tick, "data": { "dropped": dropped } }).to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Event(Inbound),
    /// Replaces the client's topic filter.
    Subscribe(BTreeSet<String>),
}

#[derive(Deserialize)]
struct Frame {
    topic: String,
    #[serde(default)]
    data: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyData {
    key: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubscribeData {
    topics: Vec<String>,
}

pub fn decode(text: &str) -> Result<ClientMessage, String> {
    let frame: Frame = serde_json::from_str(text).map_err(|e| format!("malformed frame: {e}"))?;
    let data = |v: Value| if v.is_null() { json!({}) } else { v };
    match frame.topic.as_str() {
        topic::TELEOP_KEY => {
            let k: KeyData = serde_json::from_value(frame.data).map_err(|e| format!("bad teleop_key data: {e}"))?;
            let key = match k.key.as_str() {
                "space" | "Space" => ' ',
                s => {
                    let mut chars = s.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => c,
                        _ => return Err(format!("teleop_key needs one character, got `{s}`")),
                    }
                }
            };
            Ok(ClientMessage::Event(Inbound::Key(key)))
        }
        topic::ESTOP_RESET => Ok(ClientMessage::Event(Inbound::EstopReset)),
        topic::GOAL => {
            let pose: Pose2D = serde_json::from_value(data(frame.data)).map_err(|e| format!("bad goal data: {e}"))?;
            if !pose.is_finite() {
                return Err("goal must be finite".into());
            }
            Ok(ClientMessage::Event(Inbound::Goal(pose)))
        }
        "subscribe" => {
            let s: SubscribeData =
                serde_json::from_value(frame.data).map_err(|e| format!("bad subscribe data: {e}"))?;
            Ok(ClientMessage::Subscribe(s.topics.into_iter().collect()))
        }
        other => Err(format!("topic `{other}` is not accepted from clients")),
    }
}
