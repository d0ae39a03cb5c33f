//! The deterministic tick loop that wires every module together, plus
//! transcripts and the live snapshot/command service.
//!
//! Each tick runs, in order: scripted persons, sensing, VFOA and speech
//! assignment, world model and predicates, attention and selection,
//! dialogue, supervision, navigation. Everything observable is logged as a
//! transcript record with floats rounded to 4 decimals.

mod scenario;
mod serve;
mod sim;

pub use scenario::{HeadCue, Look, Reply, Scenario, ScheduledGoal, ScriptedPerson, Utterance, Waypoint, BUNDLED};
pub use serve::{serve, ClientMessage, ServeConfig, ServeHandle, PROTOCOL_VERSION};
pub use sim::{Command, Simulation, DIALOGUE_HISTORY, REPLY_LOOK_TICKS};

use crate::geometry::round4;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("map: {0}")]
    Map(#[from] crate::MapError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("invalid transcript line {line}: {message}")]
    Transcript { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Perception,
    Attention,
    Predicate,
    Dialogue,
    Action,
    Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub tick: u64,
    pub channel: Channel,
    pub payload: Value,
}

impl Record {
    /// Record with `payload` serialized, keys sorted and floats rounded.
    pub fn new(tick: u64, channel: Channel, payload: impl Serialize) -> Record {
        let v = serde_json::to_value(payload).expect("payloads serialize");
        Record { tick, channel, payload: canonical(v) }
    }
}

/// Rounds every float to 4 decimals and sorts object keys.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            let x = round4(n.as_f64().unwrap_or(0.0));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonical(v))).collect())
        }
        other => other,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub records: Vec<Record>,
}

impl Transcript {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(out, "{}", serde_json::to_string(r).expect("records serialize"));
        }
        out
    }

    /// Parses and checks a transcript: every line a record, ticks non-decreasing.
    pub fn from_jsonl(text: &str) -> Result<Transcript, HarnessError> {
        let mut records: Vec<Record> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| HarnessError::Transcript { line: i + 1, message };
            let r: Record = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if records.last().is_some_and(|p| p.tick > r.tick) {
                return Err(err("tick decreased".into()));
            }
            if !r.payload.is_object() {
                return Err(err("payload must be an object".into()));
            }
            records.push(r);
        }
        Ok(Transcript { records })
    }

    pub fn channel(&self, channel: Channel) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.channel == channel)
    }
}

/// Runs `scenario` headless to its end condition.
pub fn run(scenario: &Scenario) -> Result<Transcript, HarnessError> {
    let mut sim = Simulation::new(scenario.clone())?;
    let mut t = Transcript::default();
    while !sim.finished() {
        t.records.extend(sim.step());
    }
    Ok(t)
}
