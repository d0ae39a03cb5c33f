//! Deterministic simulator and planning engine for a mall guide robot.
//!
//! Modules, bottom-up: [`geometry`] and [`grid`] primitives, the
//! [`semantic_map`], [`svp`] placement, [`world_model`], [`perception`],
//! [`social_state`], [`navigation`], [`dialogue`], [`supervision`] and the
//! [`harness`] tick loop that wires them together.

pub mod geometry;
pub mod grid;
pub mod rng;
pub mod semantic_map;
pub mod svp;
pub mod world_model;
pub mod perception;
pub mod social_state;
pub mod navigation;
pub mod dialogue;
pub mod supervision;
pub mod harness;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub use geometry::{Point2, Polygon, Pose2};
pub use grid::{Cell, OccupancyGrid};
pub use semantic_map::{MapError, Route, RouteConstraints, SemanticMap};
pub use svp::{Placement, SvpConfig, VisibilityGrid};

/// Output language for templates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    En,
    Fi,
}

impl Language {
    pub fn as_str(&self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Fi => "fi",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "en" => Ok(Language::En),
            "fi" => Ok(Language::Fi),
            _ => Err(MapError::UnsupportedLanguage(s.to_string())),
        }
    }
}

/// Bundled data files.
pub mod assets {
    pub const MINIMALL_MAP: &str = include_str!("../assets/maps/minimall.json");
    pub const TEMPLATES_EN: &str = include_str!("../assets/dialogue/en.json");
    pub const TEMPLATES_FI: &str = include_str!("../assets/dialogue/fi.json");
    pub const QUIZ_EN: &str = include_str!("../assets/dialogue/quiz_en.json");
    pub const QUIZ_FI: &str = include_str!("../assets/dialogue/quiz_fi.json");
}
