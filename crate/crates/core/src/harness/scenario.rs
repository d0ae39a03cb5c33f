use super::HarnessError;
use crate::geometry::{Point2, Pose2};
use crate::navigation::NavConfig;
use crate::perception::SensorConfig;
use crate::social_state::FusionConfig;
use crate::supervision::GuidanceParams;
use crate::svp::SvpConfig;
use crate::Language;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// A scripted run: the world, the robot, and what every person does when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Path of a map file; the bundled minimall map when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    pub seed: u64,
    #[serde(default = "default_tick_rate")]
    pub tick_rate: u32,
    pub max_ticks: u64,
    /// Stop this many ticks after the last task ended, once at least one task ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_when_idle: Option<u64>,
    #[serde(default)]
    pub language: Language,
    /// Robot start; the map's home pose when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<Pose2>,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub navigation: NavConfig,
    #[serde(default)]
    pub svp: SvpConfig,
    #[serde(default)]
    pub guidance: GuidanceParams,
    /// Recipe overrides, in the form [`crate::supervision::RecipeBook::with_overrides`] reads.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipes: Option<serde_json::Value>,
    #[serde(default)]
    pub persons: Vec<ScriptedPerson>,
    /// Goals injected directly into the supervisor.
    #[serde(default)]
    pub goals: Vec<ScheduledGoal>,
}

fn default_tick_rate() -> u32 {
    10
}

fn default_speed() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn default_reply_delay() -> u64 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedPerson {
    pub id: String,
    /// Appearance label the descriptor derives from; the id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub start: Point2,
    /// m/s
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default)]
    pub waypoints: Vec<Waypoint>,
    #[serde(default)]
    pub head: Vec<HeadCue>,
    #[serde(default)]
    pub utterances: Vec<Utterance>,
    /// Answers said once, `delay` ticks after the robot says something containing `on`.
    #[serde(default)]
    pub replies: Vec<Reply>,
    /// Inclusive tick intervals of silent speech activity.
    #[serde(default)]
    pub speaking: Vec<[u64; 2]>,
    /// Inclusive tick intervals during which the person is out of the scene.
    #[serde(default)]
    pub absent: Vec<[u64; 2]>,
    /// Walks to the viewing spot the robot proposes.
    #[serde(default = "yes")]
    pub follows_guidance: bool,
    /// Turns to whatever the robot points at.
    #[serde(default = "yes")]
    pub looks_at_pointing: bool,
}

impl ScriptedPerson {
    pub fn new(id: &str, start: Point2) -> Self {
        ScriptedPerson {
            id: id.to_string(),
            label: None,
            start,
            speed: default_speed(),
            waypoints: vec![],
            head: vec![],
            utterances: vec![],
            replies: vec![],
            speaking: vec![],
            absent: vec![],
            follows_guidance: true,
            looks_at_pointing: true,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.id)
    }
}

/// Walk towards `to` from `tick` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub tick: u64,
    pub to: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadCue {
    pub tick: u64,
    pub look: Look,
    #[serde(default)]
    pub pitch: f64,
}

/// Where a head points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Look {
    #[default]
    Robot,
    Screen,
    /// Facing directly away from the robot.
    Away,
    /// Absolute yaw, rad.
    Yaw(f64),
    At(Point2),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utterance {
    pub tick: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reply {
    pub on: String,
    pub text: String,
    #[serde(default = "default_reply_delay")]
    pub delay: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledGoal {
    pub tick: u64,
    /// Perceived identity the task serves.
    pub person: String,
    pub goal: serde_json::Value,
}

fn ordered<T>(items: &[T], tick: impl Fn(&T) -> u64) -> bool {
    items.windows(2).all(|w| tick(&w[0]) <= tick(&w[1]))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, HarnessError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| HarnessError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// One of the scenarios shipped with the crate.
    pub fn bundled(name: &str) -> Option<Scenario> {
        let text = BUNDLED.iter().find(|(n, _)| *n == name)?.1;
        Some(Scenario::from_json(text).expect("bundled scenarios are valid"))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Scenario(m));
        if self.tick_rate == 0 {
            return bad("tick_rate must be positive".into());
        }
        if self.max_ticks == 0 {
            return bad("max_ticks must be positive".into());
        }
        self.sensor.validate().map_err(HarnessError::Scenario)?;
        self.fusion.validate().map_err(|e| HarnessError::Scenario(e.to_string()))?;
        if let Some(r) = &self.robot {
            if !(r.x.is_finite() && r.y.is_finite() && r.yaw.is_finite()) {
                return bad("robot pose must be finite".into());
            }
        }
        let mut ids = BTreeSet::new();
        for p in &self.persons {
            if p.id.is_empty() || !ids.insert(p.id.as_str()) {
                return bad(format!("person id '{}' is empty or repeated", p.id));
            }
            if !(p.speed > 0.0 && p.speed.is_finite()) {
                return bad(format!("{}: speed must be positive", p.id));
            }
            let finite = p.start.is_finite()
                && p.waypoints.iter().all(|w| w.to.is_finite())
                && p.head.iter().all(|h| {
                    h.pitch.is_finite()
                        && match h.look {
                            Look::Yaw(y) => y.is_finite(),
                            Look::At(a) => a.is_finite(),
                            _ => true,
                        }
                });
            if !finite {
                return bad(format!("{}: coordinates must be finite", p.id));
            }
            if !ordered(&p.waypoints, |w| w.tick) || !ordered(&p.head, |h| h.tick) || !ordered(&p.utterances, |u| u.tick)
            {
                return bad(format!("{}: schedules must be time-ordered", p.id));
            }
            for [a, b] in p.speaking.iter().chain(&p.absent) {
                if a > b {
                    return bad(format!("{}: interval [{a}, {b}] is reversed", p.id));
                }
            }
            if !ordered(&p.speaking, |i| i[0]) || !ordered(&p.absent, |i| i[0]) {
                return bad(format!("{}: schedules must be time-ordered", p.id));
            }
            if p.replies.iter().any(|r| r.on.is_empty()) {
                return bad(format!("{}: reply trigger must not be empty", p.id));
            }
        }
        if !ordered(&self.goals, |g| g.tick) {
            return bad("goals must be time-ordered".into());
        }
        Ok(())
    }
}

pub const BUNDLED: [(&str, &str); 4] = [
    ("guidance_nominal", include_str!("../../assets/scenarios/guidance_nominal.json")),
    ("guidance_no_stairs", include_str!("../../assets/scenarios/guidance_no_stairs.json")),
    ("guidance_human_lost", include_str!("../../assets/scenarios/guidance_human_lost.json")),
    ("quiz_interrupts_guidance", include_str!("../../assets/scenarios/quiz_interrupts_guidance.json")),
];
