//! Per-topic CSV traces of everything published on the bus.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::Context;
use diffbot_core::bus::{Envelope, Payload, PayloadKind, TopicRegistry};

/// Column names after `tick` for a payload kind. Scans have one range
/// column per beam.
pub fn columns(kind: PayloadKind, beams: usize) -> Vec<String> {
    let fixed: &[&str] = match kind {
        PayloadKind::Key => &["key"],
        PayloadKind::Twist => &["vx", "vy", "omega"],
        PayloadKind::Wheels | PayloadKind::Pwm => &["left", "right"],
        PayloadKind::Encoder => &["delta_ticks_left", "delta_ticks_right", "dt"],
        PayloadKind::Odometry => &["x", "y", "theta", "vx", "vy", "omega"],
        PayloadKind::Scan => &["angle_min", "angle_increment", "max_range"],
        PayloadKind::Flag => &["active"],
        PayloadKind::Trigger => &[],
        PayloadKind::Led => &["status"],
        PayloadKind::Pose => &["x", "y", "theta"],
    };
    let mut cols: Vec<String> = fixed.iter().map(|s| s.to_string()).collect();
    if kind == PayloadKind::Scan {
        cols.extend((0..beams).map(|i| format!("r{i}")));
    }
    cols
}

/// Field values matching [`columns`]. A beam without a return is empty.
pub fn fields(payload: &Payload) -> Vec<String> {
    let f = |v: f64| v.to_string();
    match payload {
        Payload::Key(c) => vec![c.to_string()],
        Payload::Twist(t) => vec![f(t.vx), f(t.vy), f(t.omega)],
        Payload::Wheels(w) => vec![f(w.left), f(w.right)],
        Payload::Pwm(p) => vec![p.left().to_string(), p.right().to_string()],
        Payload::Encoder(s) => vec![s.delta_ticks_left.to_string(), s.delta_ticks_right.to_string(), f(s.dt)],
        Payload::Odometry { pose, twist } => {
            vec![f(pose.x), f(pose.y), f(pose.theta), f(twist.vx), f(twist.vy), f(twist.omega)]
        }
        Payload::Scan(s) => {
            let mut v = vec![f(s.angle_min), f(s.angle_increment), f(s.max_range)];
            v.extend(s.ranges.iter().map(|r| r.map(f).unwrap_or_default()));
            v
        }
        Payload::Flag(b) => vec![b.to_string()],
        Payload::Trigger => vec![],
        Payload::Led(l) => vec![l.as_str().to_string()],
        Payload::Pose(p) => vec![f(p.x), f(p.y), f(p.theta)],
    }
}

pub struct TraceWriter {
    dir: PathBuf,
    writers: BTreeMap<String, csv::Writer<File>>,
}

impl TraceWriter {
    /// Creates one CSV per declared topic with its header row.
    pub fn create(dir: &Path, registry: &TopicRegistry, beams: usize) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut writers = BTreeMap::new();
        for name in registry.topic_names() {
            let kind = registry.schema(name).expect("listed topic");
            let path = dir.join(format!("{name}.csv"));
            let mut w = csv::WriterBuilder::new()
                .flexible(true)
                .from_path(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            let mut header = vec!["tick".to_string()];
            header.extend(columns(kind, beams));
            w.write_record(&header)?;
            writers.insert(name.to_string(), w);
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            writers,
        })
    }

    pub fn write(&mut self, envelopes: &[Envelope]) -> anyhow::Result<()> {
        for env in envelopes {
            let Some(w) = self.writers.get_mut(&env.topic) else {
                continue;
            };
            let mut row = vec![env.tick.to_string()];
            row.extend(fields(&env.payload));
            w.write_record(&row)
                .with_context(|| format!("writing {}/{}.csv", self.dir.display(), env.topic))?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> anyhow::Result<()> {
        for (name, w) in &mut self.writers {
            w.flush().with_context(|| format!("writing {}/{name}.csv", self.dir.display()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use diffbot_core::bus::topic;
    use diffbot_core::Twist2D;

    #[test]
    fn headers_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let reg = TopicRegistry::standard();
        let mut w = TraceWriter::create(dir.path(), &reg, 4).unwrap();
        w.write(&[Envelope {
            topic: topic::CMD_VEL.into(),
            tick: 3,
            payload: Payload::Twist(Twist2D::new(0.3, 0.0, -1.0)),
        }])
        .unwrap();
        w.flush().unwrap();
        let cmd = fs::read_to_string(dir.path().join("cmd_vel.csv")).unwrap();
        assert_eq!(cmd, "tick,vx,vy,omega\n3,0.3,0,-1\n");
        let scan = fs::read_to_string(dir.path().join("scan.csv")).unwrap();
        assert_eq!(scan, "tick,angle_min,angle_increment,max_range,r0,r1,r2,r3\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 12);
    }

    #[test]
    fn columns_match_fields() {
        use diffbot_core::bus::StatusLed;
        let samples = [
            Payload::Key('w'),
            Payload::Flag(true),
            Payload::Trigger,
            Payload::Led(StatusLed::Estop),
            Payload::Pose(Default::default()),
            Payload::Odometry {
                pose: Default::default(),
                twist: Default::default(),
            },
        ];
        for p in samples {
            assert_eq!(columns(p.kind(), 0).len(), fields(&p).len(), "{p:?}");
        }
    }
}
