//! Attention estimation: four per-person probabilities fused into one, the
//! interactant choice, and the ledger of current and recent interactants.

use crate::geometry::round4;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SocialError {
    #[error("unknown task event '{0}'")]
    UnknownEvent(String),
    #[error("invalid fusion config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Head-pose centroids as (yaw, pitch), yaw relative to the robot bearing.
    pub centroids: [[f64; 2]; 3],
    pub d_norm: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// (head, robot gaze, screen gaze, distance)
    pub weights: [f64; 4],
    pub threshold: f64,
    pub cooldown: u64,
    pub penalty: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            centroids: [[0.0, 0.0], [0.4, -0.1], [-0.4, -0.1]],
            d_norm: 0.6,
            d_min: 1.2,
            d_max: 5.0,
            weights: [0.25; 4],
            threshold: 0.5,
            cooldown: 100,
            penalty: 0.2,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), SocialError> {
        let bad = |m: &str| Err(SocialError::InvalidConfig(m.to_string()));
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return bad("weights must be non-negative");
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("weights must sum to 1");
        }
        if !(self.d_min < self.d_max) {
            return bad("d_min must be below d_max");
        }
        if !(self.d_norm > 0.0) {
            return bad("d_norm must be positive");
        }
        if !(0.0..=1.0).contains(&self.threshold) || !(0.0..=1.0).contains(&self.penalty) {
            return bad("threshold and penalty must be in [0, 1]");
        }
        Ok(())
    }
}

/// `max(0, 1 - d / D_norm)` with `d` the distance to the nearest centroid.
pub fn p_head_pose(yaw: f64, pitch: f64, config: &FusionConfig) -> f64 {
    let d = config
        .centroids
        .iter()
        .map(|c| (yaw - c[0]).hypot(pitch - c[1]))
        .fold(f64::INFINITY, f64::min);
    (1.0 - d / config.d_norm).max(0.0)
}

/// 1 up to `d_min`, linear down to 0 at `d_max`.
pub fn p_distance(d: f64, config: &FusionConfig) -> f64 {
    if d <= config.d_min {
        1.0
    } else if d >= config.d_max {
        0.0
    } else {
        (config.d_max - d) / (config.d_max - config.d_min)
    }
}

/// Weighted mean of the four components, clamped into `[0, 1]`.
pub fn fuse(components: [f64; 4], weights: [f64; 4]) -> f64 {
    components.iter().zip(weights).map(|(p, w)| p * w).sum::<f64>().clamp(0.0, 1.0)
}

/// Per-person signals the fusion works from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionInput {
    pub id: String,
    /// Head yaw minus the bearing from the person to the robot.
    pub head_yaw_rel: f64,
    pub head_pitch: f64,
    pub looking_at_robot: bool,
    pub looking_at_screen: bool,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub track: String,
    pub p_head: f64,
    pub p_robot_gaze: f64,
    pub p_screen_gaze: f64,
    pub p_dist: f64,
    pub p_fused: f64,
    pub distance: f64,
    pub tick: u64,
}

impl AttentionRecord {
    pub fn components(&self) -> [f64; 4] {
        [self.p_head, self.p_robot_gaze, self.p_screen_gaze, self.p_dist]
    }

    /// Copy with every float rounded for transcript output.
    pub fn rounded(&self) -> AttentionRecord {
        AttentionRecord {
            p_head: round4(self.p_head),
            p_robot_gaze: round4(self.p_robot_gaze),
            p_screen_gaze: round4(self.p_screen_gaze),
            p_dist: round4(self.p_dist),
            p_fused: round4(self.p_fused),
            distance: round4(self.distance),
            ..self.clone()
        }
    }
}

pub fn attention_record(input: &AttentionInput, config: &FusionConfig, tick: u64) -> AttentionRecord {
    let p_head = p_head_pose(input.head_yaw_rel, input.head_pitch, config);
    let p_robot_gaze = f64::from(u8::from(input.looking_at_robot));
    let p_screen_gaze = f64::from(u8::from(input.looking_at_screen));
    let p_dist = p_distance(input.distance, config);
    AttentionRecord {
        track: input.id.clone(),
        p_head,
        p_robot_gaze,
        p_screen_gaze,
        p_dist,
        p_fused: fuse([p_head, p_robot_gaze, p_screen_gaze, p_dist], config.weights),
        distance: input.distance,
        tick,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngagementState {
    Interacting,
    Cooldown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Engagement {
    pub state: EngagementState,
    /// Last tick of the penalty; `None` while interacting.
    pub until: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "person", rename_all = "snake_case")]
pub enum EngagementEvent {
    Started(String),
    Ended(String),
}

impl EngagementEvent {
    pub fn parse(kind: &str, person: &str) -> Result<Self, SocialError> {
        match kind {
            "started" => Ok(EngagementEvent::Started(person.to_string())),
            "ended" => Ok(EngagementEvent::Ended(person.to_string())),
            other => Err(SocialError::UnknownEvent(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EngagementLedger {
    pub entries: BTreeMap<String, Engagement>,
}

impl EngagementLedger {
    /// Start marks the person as interacting; end starts a cooldown lasting
    /// through `tick + cooldown`. Ending an unknown person is a no-op.
    pub fn on_task_event(&mut self, event: &EngagementEvent, config: &FusionConfig, tick: u64) {
        match event {
            EngagementEvent::Started(p) => {
                self.entries.insert(p.clone(), Engagement { state: EngagementState::Interacting, until: None });
            }
            EngagementEvent::Ended(p) => {
                if let Some(e) = self.entries.get_mut(p) {
                    *e = Engagement { state: EngagementState::Cooldown, until: Some(tick + config.cooldown) };
                }
            }
        }
    }

    /// Drops cooldowns that ended before `tick`.
    pub fn expire(&mut self, tick: u64) {
        self.entries.retain(|_, e| e.until.is_none_or(|u| tick <= u));
    }

    pub fn is_penalized(&self, person: &str, tick: u64) -> bool {
        self.entries.get(person).is_some_and(|e| e.until.is_none_or(|u| tick <= u))
    }
}

/// Attention after the ledger penalty.
pub fn effective_attention(record: &AttentionRecord, ledger: &EngagementLedger, config: &FusionConfig, tick: u64) -> f64 {
    if ledger.is_penalized(&record.track, tick) {
        record.p_fused * config.penalty
    } else {
        record.p_fused
    }
}

/// Highest effective attention at or above the threshold; ties go to the
/// nearer person, then the smaller id.
pub fn select_interactant<'a>(
    records: &'a [AttentionRecord],
    ledger: &EngagementLedger,
    config: &FusionConfig,
    tick: u64,
) -> Option<&'a str> {
    let mut best: Option<(f64, &AttentionRecord)> = None;
    for r in records {
        let p = effective_attention(r, ledger, config, tick);
        if p < config.threshold {
            continue;
        }
        let better = match best {
            None => true,
            Some((bp, b)) => {
                p > bp || (p == bp && (r.distance < b.distance || (r.distance == b.distance && r.track < b.track)))
            }
        };
        if better {
            best = Some((p, r));
        }
    }
    best.map(|(_, r)| r.track.as_str())
}
