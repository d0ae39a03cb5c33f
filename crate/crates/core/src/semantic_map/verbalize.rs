use super::{AccessKind, MapError, Route, SemanticMap};
use crate::geometry::Point2;
use crate::svp::{pointing_angles, GestureParams, Placement, PointingAngles, SHOULDER_HEIGHT};
use crate::Language;
use serde::{Deserialize, Serialize};

/// Vertical distance between floors, used to aim at targets on other levels.
pub const FLOOR_HEIGHT: f64 = 4.0;

/// One act of the pointing-and-explaining sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "act", rename_all = "snake_case")]
pub enum GuidanceAct {
    Point {
        /// Place or access point id.
        target: String,
        at: Point2,
        height: f64,
        angles: PointingAngles,
    },
    Say {
        text: String,
    },
}

fn kind_word(kind: AccessKind, lang: Language) -> &'static str {
    match (lang, kind) {
        (Language::En, k) => k.as_str(),
        (Language::Fi, AccessKind::Stairs) => "portaita",
        (Language::Fi, AccessKind::Escalator) => "liukuportaita",
        (Language::Fi, AccessKind::Elevator) => "hissillä",
        (Language::Fi, AccessKind::Opening) => "kulkuaukosta",
    }
}

impl SemanticMap {
    /// Fixed-template route description.
    ///
    /// One sentence per step (`Take the {kind} {up|down} to floor {n}.`,
    /// or `Go through the opening to the {region}.` between regions on the
    /// same floor), then `{Label} is there.`; a same-region destination is
    /// `{Label} is right here in this square.` Finnish output uses
    /// pre-translated templates of the same shape.
    pub fn verbalize_route(&self, route: &Route, lang: Language) -> Result<String, MapError> {
        let dest = self
            .place(&route.destination)
            .ok_or_else(|| MapError::UnknownPlace(route.destination.clone()))?;
        if route.steps.is_empty() {
            return Ok(match lang {
                Language::En => format!("{} is right here in this square.", dest.label),
                Language::Fi => format!("{} on tässä aukiolla.", dest.label),
            });
        }
        let mut sentences = Vec::with_capacity(route.steps.len() + 1);
        for step in &route.steps {
            let ap = self
                .access_point(&step.access_point)
                .ok_or_else(|| MapError::Schema(format!("unknown access point '{}'", step.access_point)))?;
            let from = self
                .region(&step.from_region)
                .ok_or_else(|| MapError::UnknownRegion(step.from_region.clone()))?;
            let to = self
                .region(&step.to_region)
                .ok_or_else(|| MapError::UnknownRegion(step.to_region.clone()))?;
            let word = kind_word(ap.kind, lang);
            let sentence = if to.floor == from.floor {
                match lang {
                    Language::En => format!("Go through the {word} to the {}.", to.label),
                    Language::Fi => format!("Kulje {word} alueelle {}.", to.label),
                }
            } else {
                let up = to.floor > from.floor;
                match lang {
                    Language::En => format!(
                        "Take the {word} {} to floor {}.",
                        if up { "up" } else { "down" },
                        to.floor
                    ),
                    Language::Fi => format!(
                        "Mene {word} {} kerrokseen {}.",
                        if up { "ylös" } else { "alas" },
                        to.floor
                    ),
                }
            };
            sentences.push(sentence);
        }
        sentences.push(match lang {
            Language::En => format!("{} is there.", dest.label),
            Language::Fi => format!("{} on siellä.", dest.label),
        });
        Ok(sentences.join(" "))
    }

    /// Pointing and speech acts for explaining `route` from `placement`:
    /// point toward the destination, point at the first access point (if
    /// the route has one), then say the verbalized route. Only the first
    /// access point of a multi-step route is pointed at.
    pub fn guidance_acts(
        &self,
        route: &Route,
        placement: &Placement,
        lang: Language,
        gesture: GestureParams,
    ) -> Result<Vec<GuidanceAct>, MapError> {
        let robot = placement.robot;
        let robot_floor = self.region(&route.start_region).map_or(0, |r| r.floor);
        let dest = self
            .place(&route.destination)
            .ok_or_else(|| MapError::UnknownPlace(route.destination.clone()))?;
        let point_at = |target: &str, at: Point2, floor: i32| {
            let height = SHOULDER_HEIGHT + FLOOR_HEIGHT * f64::from(floor - robot_floor);
            let angles = pointing_angles(&robot, at, height, gesture).unwrap_or(PointingAngles {
                base_yaw: robot.yaw,
                arm_elevation: 0.0,
                params: gesture,
            });
            GuidanceAct::Point { target: target.to_string(), at, height, angles }
        };

        let mut acts = vec![point_at(&dest.id, dest.centroid(), dest.floor.unwrap_or(robot_floor))];
        if let Some(first) = route.steps.first() {
            let ap = self
                .access_point(&first.access_point)
                .ok_or_else(|| MapError::Schema(format!("unknown access point '{}'", first.access_point)))?;
            let anchor = ap.anchor_in(&first.from_region).unwrap_or(ap.anchors[0]);
            acts.push(point_at(&ap.id, anchor, robot_floor));
        }
        acts.push(GuidanceAct::Say { text: self.verbalize_route(route, lang)? });
        Ok(acts)
    }
}
