//! Semantic spatial representation of the mall: a concept hierarchy, regions
//! joined by access points, places with footprints, route search and route
//! verbalization.
//!
//! A [`SemanticMap`] is immutable once loaded and can be shared freely
//! between threads.

mod route;
mod verbalize;

pub use route::{Route, RouteConstraints, RouteStep};
pub use verbalize::GuidanceAct;

use crate::geometry::{Point2, Polygon, Pose2};
use crate::grid::OccupancyGrid;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dangling reference: {kind} '{name}' is not defined")]
    DanglingReference { kind: &'static str, name: String },
    #[error("cyclic concept hierarchy through '{0}'")]
    CyclicHierarchy(String),
    #[error("unknown concept '{0}'")]
    UnknownConcept(String),
    #[error("unknown region '{0}'")]
    UnknownRegion(String),
    #[error("unknown place '{0}'")]
    UnknownPlace(String),
    #[error("no route from '{from}' to '{to}' under the given constraints")]
    NoRoute { from: String, to: String },
    #[error("unsupported language '{0}'")]
    UnsupportedLanguage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessKind {
    Stairs,
    Escalator,
    Elevator,
    Opening,
}

impl AccessKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AccessKind::Stairs => "stairs",
            AccessKind::Escalator => "escalator",
            AccessKind::Elevator => "elevator",
            AccessKind::Opening => "opening",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub name: String,
    #[serde(default)]
    pub parents: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub label: String,
    pub floor: i32,
    pub footprint: Polygon,
    /// Default start point for route queries that give only a region.
    #[serde(default)]
    pub reference: Option<Point2>,
}

impl Region {
    pub fn reference_point(&self) -> Point2 {
        self.reference.unwrap_or_else(|| self.footprint.centroid())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub id: String,
    pub concept: String,
    pub label: String,
    #[serde(default)]
    pub floor: Option<i32>,
    pub footprint: Polygon,
    #[serde(default)]
    pub centroid: Option<Point2>,
    pub region: String,
    /// Item concepts sold here; searched at the lowest priority.
    #[serde(default)]
    pub sells: Vec<String>,
}

impl Place {
    pub fn centroid(&self) -> Point2 {
        self.centroid.unwrap_or_else(|| self.footprint.centroid())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: String,
    pub kind: AccessKind,
    pub connects: [String; 2],
    /// One anchor per side, aligned with `connects`.
    pub anchors: [Point2; 2],
    pub traversal_length: f64,
    /// Visible extent on the first region's side; defaults to a 1 m square
    /// around the first anchor.
    #[serde(default)]
    pub footprint: Option<Polygon>,
}

impl AccessPoint {
    pub fn anchor_in(&self, region: &str) -> Option<Point2> {
        if self.connects[0] == region {
            Some(self.anchors[0])
        } else if self.connects[1] == region {
            Some(self.anchors[1])
        } else {
            None
        }
    }

    pub fn other_side(&self, region: &str) -> Option<&str> {
        if self.connects[0] == region {
            Some(&self.connects[1])
        } else if self.connects[1] == region {
            Some(&self.connects[0])
        } else {
            None
        }
    }

    pub fn visible_footprint(&self) -> Polygon {
        self.footprint.clone().unwrap_or_else(|| {
            let a = self.anchors[0];
            Polygon::rect(Point2::new(a.x - 0.5, a.y - 0.5), Point2::new(a.x + 0.5, a.y + 0.5))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub region: String,
    pub footprint: Polygon,
    #[serde(default = "default_obstacle_height")]
    pub height: f64,
}

fn default_obstacle_height() -> f64 {
    2.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancySpec {
    pub region: String,
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

/// The on-disk map document (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    #[serde(default)]
    pub name: String,
    pub concepts: Vec<Concept>,
    pub regions: Vec<Region>,
    pub places: Vec<Place>,
    pub access_points: Vec<AccessPoint>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub occupancy: Option<OccupancySpec>,
    #[serde(default)]
    pub robot_home: Option<Pose2>,
}

/// A validated, cross-linked map.
#[derive(Debug, Clone)]
pub struct SemanticMap {
    name: String,
    concepts: BTreeMap<String, Concept>,
    /// Reflexive-transitive ancestor closure per concept.
    ancestors: BTreeMap<String, BTreeSet<String>>,
    regions: BTreeMap<String, Region>,
    places: BTreeMap<String, Place>,
    access_points: BTreeMap<String, AccessPoint>,
    obstacles: Vec<Obstacle>,
    occupancy: Option<OccupancySpec>,
    robot_home: Pose2,
}

impl SemanticMap {
    /// Parses and validates a JSON map document.
    pub fn load(document: &str) -> Result<SemanticMap, MapError> {
        let doc: MapDocument =
            serde_json::from_str(document).map_err(|e| MapError::Schema(e.to_string()))?;
        SemanticMap::from_document(doc)
    }

    pub fn from_document(doc: MapDocument) -> Result<SemanticMap, MapError> {
        let mut concepts = BTreeMap::new();
        for c in doc.concepts {
            if c.name.trim().is_empty() {
                return Err(MapError::Schema("concept with empty name".into()));
            }
            if concepts.insert(c.name.clone(), c.clone()).is_some() {
                return Err(MapError::Schema(format!("duplicate concept '{}'", c.name)));
            }
        }
        for c in concepts.values() {
            for p in &c.parents {
                if !concepts.contains_key(p) {
                    return Err(MapError::DanglingReference { kind: "concept", name: p.clone() });
                }
            }
        }
        let ancestors = ancestor_closure(&concepts)?;

        let mut regions = BTreeMap::new();
        for r in doc.regions {
            if !r.footprint.is_simple() {
                return Err(MapError::Schema(format!("region '{}' footprint is not a simple polygon", r.id)));
            }
            if regions.insert(r.id.clone(), r.clone()).is_some() {
                return Err(MapError::Schema(format!("duplicate region '{}'", r.id)));
            }
        }

        let mut places = BTreeMap::new();
        for mut p in doc.places {
            let region = regions
                .get(&p.region)
                .ok_or_else(|| MapError::DanglingReference { kind: "region", name: p.region.clone() })?;
            if !concepts.contains_key(&p.concept) {
                return Err(MapError::DanglingReference { kind: "concept", name: p.concept.clone() });
            }
            for s in &p.sells {
                if !concepts.contains_key(s) {
                    return Err(MapError::DanglingReference { kind: "concept", name: s.clone() });
                }
            }
            if !p.footprint.is_simple() {
                return Err(MapError::Schema(format!("place '{}' footprint is not a simple polygon", p.id)));
            }
            match p.floor {
                Some(f) if f != region.floor => {
                    return Err(MapError::Schema(format!(
                        "place '{}' floor {} differs from its region's floor {}",
                        p.id, f, region.floor
                    )))
                }
                _ => p.floor = Some(region.floor),
            }
            let c = p.centroid();
            if !p.footprint.contains(&c) {
                return Err(MapError::Schema(format!("place '{}' centroid lies outside its footprint", p.id)));
            }
            p.centroid = Some(c);
            if places.insert(p.id.clone(), p.clone()).is_some() {
                return Err(MapError::Schema(format!("duplicate place '{}'", p.id)));
            }
        }

        let mut access_points = BTreeMap::new();
        for a in doc.access_points {
            for r in &a.connects {
                if !regions.contains_key(r) {
                    return Err(MapError::DanglingReference { kind: "region", name: r.clone() });
                }
            }
            if a.connects[0] == a.connects[1] {
                return Err(MapError::Schema(format!("access point '{}' connects a region to itself", a.id)));
            }
            if !(a.traversal_length > 0.0 && a.traversal_length.is_finite()) {
                return Err(MapError::Schema(format!("access point '{}' traversal_length must be > 0", a.id)));
            }
            if !a.anchors.iter().all(Point2::is_finite) {
                return Err(MapError::Schema(format!("access point '{}' has non-finite anchors", a.id)));
            }
            if let Some(fp) = &a.footprint {
                if !fp.is_simple() {
                    return Err(MapError::Schema(format!("access point '{}' footprint is not simple", a.id)));
                }
            }
            if access_points.insert(a.id.clone(), a.clone()).is_some() {
                return Err(MapError::Schema(format!("duplicate access point '{}'", a.id)));
            }
        }

        for o in &doc.obstacles {
            if !regions.contains_key(&o.region) {
                return Err(MapError::DanglingReference { kind: "region", name: o.region.clone() });
            }
            if !o.footprint.is_simple() {
                return Err(MapError::Schema(format!("obstacle '{}' footprint is not simple", o.id)));
            }
        }
        if let Some(occ) = &doc.occupancy {
            if !regions.contains_key(&occ.region) {
                return Err(MapError::DanglingReference { kind: "region", name: occ.region.clone() });
            }
            if !(occ.resolution > 0.0) || occ.width == 0 || occ.height == 0 {
                return Err(MapError::Schema("occupancy grid needs resolution > 0 and non-zero size".into()));
            }
        }

        let robot_home = match doc.robot_home {
            Some(h) => h,
            None => {
                let first = regions
                    .values()
                    .next()
                    .ok_or_else(|| MapError::Schema("map has no regions".into()))?;
                Pose2::at(first.reference_point(), 0.0)
            }
        };

        Ok(SemanticMap {
            name: doc.name,
            concepts,
            ancestors,
            regions,
            places,
            access_points,
            obstacles: doc.obstacles,
            occupancy: doc.occupancy,
            robot_home,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.values()
    }

    pub fn places(&self) -> impl Iterator<Item = &Place> {
        self.places.values()
    }

    pub fn access_points(&self) -> impl Iterator<Item = &AccessPoint> {
        self.access_points.values()
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.get(id)
    }

    pub fn place(&self, id: &str) -> Option<&Place> {
        self.places.get(id)
    }

    pub fn access_point(&self, id: &str) -> Option<&AccessPoint> {
        self.access_points.get(id)
    }

    pub fn robot_home(&self) -> Pose2 {
        self.robot_home
    }

    /// Region on `floor` containing `p`, first by id order.
    pub fn region_at(&self, p: &Point2, floor: i32) -> Option<&Region> {
        self.regions.values().find(|r| r.floor == floor && r.footprint.contains(p))
    }

    /// The occupancy grid of the walkable region, with obstacles rasterized.
    pub fn occupancy_grid(&self) -> Option<OccupancyGrid> {
        let spec = self.occupancy.as_ref()?;
        let grid = OccupancyGrid::new(spec.origin, spec.resolution, spec.width, spec.height);
        Some(grid.with_obstacles(
            self.obstacles.iter().filter(|o| o.region == spec.region).map(|o| &o.footprint),
        ))
    }

    pub fn occupancy_region(&self) -> Option<&str> {
        self.occupancy.as_ref().map(|o| o.region.as_str())
    }

    /// True iff `ancestor` is in the reflexive-transitive parent closure of `concept`.
    pub fn is_a(&self, concept: &str, ancestor: &str) -> Result<bool, MapError> {
        let closure = self
            .ancestors
            .get(concept)
            .ok_or_else(|| MapError::UnknownConcept(concept.to_string()))?;
        if !self.concepts.contains_key(ancestor) {
            return Err(MapError::UnknownConcept(ancestor.to_string()));
        }
        Ok(closure.contains(ancestor))
    }

    /// Places matching a free-text query, best matches first.
    ///
    /// Ranking: exact label, then label substring, then places whose concept
    /// falls under a concept named by the query, then places selling such a
    /// concept. Ties are broken by place id; each place is listed once at its
    /// best rank.
    pub fn resolve_place(&self, query: &str) -> Vec<&Place> {
        let q = normalize_query(query);
        if q.is_empty() {
            return Vec::new();
        }
        let named: Vec<&str> = self
            .concepts
            .keys()
            .filter(|c| concept_matches(c, &q))
            .map(String::as_str)
            .collect();
        let under_named = |concept: &str| {
            named
                .iter()
                .any(|n| self.ancestors.get(concept).is_some_and(|a| a.contains(*n)))
        };
        let mut ranked: Vec<(u8, &Place)> = self
            .places
            .values()
            .filter_map(|p| {
                let label = p.label.to_lowercase();
                let rank = if label == q {
                    0
                } else if label.contains(&q) {
                    1
                } else if under_named(&p.concept) {
                    2
                } else if p.sells.iter().any(|s| under_named(s)) {
                    3
                } else {
                    return None;
                };
                Some((rank, p))
            })
            .collect();
        ranked.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));
        ranked.into_iter().map(|(_, p)| p).collect()
    }

    /// Every phrase the dialogue layer should recognize as naming a place:
    /// labels, concept names (spaced and lowercased), and sold items.
    pub fn lexicon(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.places.values().map(|p| p.label.to_lowercase()).collect();
        let used: BTreeSet<&String> = self
            .places
            .values()
            .flat_map(|p| std::iter::once(&p.concept).chain(p.sells.iter()))
            .collect();
        for c in self.concepts.keys() {
            let closure_used = used
                .iter()
                .any(|u| self.ancestors.get(*u).is_some_and(|a| a.contains(c)));
            if closure_used {
                out.insert(humanize(c));
            }
        }
        out
    }

    /// Resolves `query` and returns the best place, if any.
    pub fn best_place(&self, query: &str) -> Option<&Place> {
        self.resolve_place(query).into_iter().next()
    }
}

fn ancestor_closure(
    concepts: &BTreeMap<String, Concept>,
) -> Result<BTreeMap<String, BTreeSet<String>>, MapError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Visiting,
        Done,
    }
    fn visit(
        name: &str,
        concepts: &BTreeMap<String, Concept>,
        marks: &mut BTreeMap<String, Mark>,
        out: &mut BTreeMap<String, BTreeSet<String>>,
    ) -> Result<(), MapError> {
        match marks.get(name) {
            Some(Mark::Done) => return Ok(()),
            Some(Mark::Visiting) => return Err(MapError::CyclicHierarchy(name.to_string())),
            None => {}
        }
        marks.insert(name.to_string(), Mark::Visiting);
        let mut closure = BTreeSet::from([name.to_string()]);
        for p in &concepts[name].parents {
            visit(p, concepts, marks, out)?;
            closure.extend(out[p].iter().cloned());
        }
        marks.insert(name.to_string(), Mark::Done);
        out.insert(name.to_string(), closure);
        Ok(())
    }

    let mut marks = BTreeMap::new();
    let mut out = BTreeMap::new();
    for name in concepts.keys() {
        visit(name, concepts, &mut marks, &mut out)?;
    }
    Ok(out)
}

/// `ShoeShop` -> `shoe shop`.
pub fn humanize(concept: &str) -> String {
    let mut out = String::new();
    for (i, ch) in concept.chars().enumerate() {
        if ch == '_' {
            out.push(' ');
            continue;
        }
        if ch.is_uppercase() && i > 0 && !out.ends_with(' ') {
            out.push(' ');
        }
        out.extend(ch.to_lowercase());
    }
    out
}

fn concept_matches(concept: &str, q: &str) -> bool {
    let h = humanize(concept);
    h == q || format!("{h}s") == q || h.replace(' ', "") == q.replace(' ', "")
}

fn normalize_query(query: &str) -> String {
    let lowered = query.to_lowercase();
    let words: Vec<&str> = lowered
        .split(|c: char| !c.is_alphanumeric() && c != '\'')
        .filter(|w| !w.is_empty())
        .collect();
    let start = words.iter().take_while(|w| matches!(**w, "the" | "a" | "an")).count();
    words[start..].join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    fn minimall() -> SemanticMap {
        SemanticMap::load(assets::MINIMALL_MAP).unwrap()
    }

    #[test]
    fn fixture_loads_with_expected_counts() {
        let m = minimall();
        assert_eq!(m.places().count(), 3);
        assert_eq!(m.access_points().count(), 3);
        let regions: Vec<_> = m.regions().map(|r| r.id.as_str()).collect();
        assert_eq!(regions, ["corridor", "floor2", "square"]);
        assert_eq!(m.place("toy_shop").unwrap().floor, Some(2));
    }

    #[test]
    fn undefined_parent_is_dangling() {
        let doc = r#"{"concepts":[{"name":"ShoeShop","parents":["Shop"]}],
            "regions":[],"places":[],"access_points":[]}"#;
        assert_eq!(
            SemanticMap::load(doc).unwrap_err(),
            MapError::DanglingReference { kind: "concept", name: "Shop".into() }
        );
    }

    #[test]
    fn two_cycle_is_rejected() {
        let doc = r#"{"concepts":[{"name":"A","parents":["B"]},{"name":"B","parents":["A"]}],
            "regions":[],"places":[],"access_points":[]}"#;
        assert!(matches!(SemanticMap::load(doc), Err(MapError::CyclicHierarchy(_))));
    }

    #[test]
    fn malformed_field_is_schema_error() {
        let doc = r#"{"concepts":[],"regions":[{"id":"r","label":"R","floor":"one","footprint":[]}],
            "places":[],"access_points":[]}"#;
        assert!(matches!(SemanticMap::load(doc), Err(MapError::Schema(_))));
    }

    #[test]
    fn non_positive_traversal_is_schema_error() {
        let doc = r#"{"concepts":[],
            "regions":[{"id":"a","label":"A","floor":1,"footprint":[[0,0],[1,0],[1,1]]},
                       {"id":"b","label":"B","floor":2,"footprint":[[0,0],[1,0],[1,1]]}],
            "places":[],
            "access_points":[{"id":"s","kind":"stairs","connects":["a","b"],
                "anchors":[[0.5,0.2],[0.5,0.2]],"traversal_length":0.0}]}"#;
        assert!(matches!(SemanticMap::load(doc), Err(MapError::Schema(_))));
    }

    #[test]
    fn subsumption() {
        let m = minimall();
        assert!(m.is_a("Shop", "Shop").unwrap());
        assert!(m.is_a("ShoeShop", "Shop").unwrap());
        assert!(!m.is_a("Shop", "ShoeShop").unwrap());
        assert_eq!(m.is_a("Nope", "Shop"), Err(MapError::UnknownConcept("Nope".into())));
    }

    #[test]
    fn resolve_orders_by_match_quality() {
        let m = minimall();
        let ids = |q: &str| m.resolve_place(q).iter().map(|p| p.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids("shoe shop"), ["shoe_shop"]);
        assert_eq!(ids("Shoe Shop"), ["shoe_shop"]);
        assert_eq!(ids("shop"), ["shoe_shop", "toy_shop"]);
        assert_eq!(ids("shops"), ["shoe_shop", "toy_shop"]);
        assert_eq!(ids("the cafe"), ["cafe"]);
        assert_eq!(ids("coffee"), ["cafe"]);
        assert!(ids("xyzzy").is_empty());
    }

    #[test]
    fn humanize_concepts() {
        assert_eq!(humanize("ShoeShop"), "shoe shop");
        assert_eq!(humanize("Cafe"), "cafe");
    }
}
