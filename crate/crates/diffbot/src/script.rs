//! Key scripts for headless teleop: one `tick:key` pair per line.
//!
//! A key is a single character, or one of the words `space` and
//! `estop_reset`. Blank lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use diffbot_core::bus::Inbound;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyScript {
    events: BTreeMap<u64, Vec<Inbound>>,
}

impl KeyScript {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut events: BTreeMap<u64, Vec<Inbound>> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_start().trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((tick, key)) = line.split_once(':') else {
                bail!("line {}: expected `tick:key`, got `{line}`", n + 1);
            };
            let tick: u64 = tick
                .trim()
                .parse()
                .with_context(|| format!("line {}: bad tick `{}`", n + 1, tick.trim()))?;
            let event = match key.trim() {
                "" if !key.is_empty() => Inbound::Key(' '),
                "space" => Inbound::Key(' '),
                "estop_reset" => Inbound::EstopReset,
                k => {
                    let mut chars = k.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => Inbound::Key(c),
                        _ => bail!("line {}: bad key `{k}`", n + 1),
                    }
                }
            };
            events.entry(tick).or_default().push(event);
        }
        Ok(Self { events })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading script {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Events to inject before running `tick`, in file order.
    pub fn at(&self, tick: u64) -> &[Inbound] {
        self.events.get(&tick).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.events.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}
