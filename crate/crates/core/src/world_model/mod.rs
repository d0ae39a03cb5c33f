//! Cascading world states with stamped symbolic predicates.
//!
//! A [`WorldSet`] holds named worlds. Each world may inherit from a parent
//! and keeps only local overrides; its effective node set is the parent's
//! effective set with the overrides applied. Per-person belief worlds fork
//! from the static `map` world and are refreshed node by node when the person
//! looks at something.

mod predicates;

pub use predicates::{
    compute_predicates, PersonFact, PredicateKey, PredicateName, PredicatePattern, PredicateTracker,
    StampedPredicate, VisibilityIndex,
};

use crate::geometry::{Point2, Polygon};
use crate::semantic_map::SemanticMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// World holding the static map geometry.
pub const MAP_WORLD: &str = "map";
/// World holding the robot's live view: map plus people and the robot itself.
pub const ROBOT_WORLD: &str = "robot";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("unknown world '{0}'")]
    UnknownWorld(String),
    #[error("world '{0}' already exists")]
    DuplicateName(String),
    #[error("unknown person '{0}'")]
    UnknownPerson(String),
    #[error("node '{0}' has a non-finite transform")]
    InvalidNode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Point,
    Footprint { polygon: Polygon },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneNode {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    pub position: Point2,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    /// Storey the node is on; `None` for nodes spanning floors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<i32>,
    pub shape: Shape,
}

impl SceneNode {
    pub fn point(id: impl Into<String>, position: Point2) -> Self {
        SceneNode { id: id.into(), parent: None, position, yaw: 0.0, height: None, floor: None, shape: Shape::Point }
    }

    pub fn area(id: impl Into<String>, footprint: Polygon) -> Self {
        SceneNode {
            id: id.into(),
            parent: None,
            position: footprint.centroid(),
            yaw: 0.0,
            height: None,
            floor: None,
            shape: Shape::Footprint { polygon: footprint },
        }
    }

    pub fn footprint(&self) -> Option<&Polygon> {
        match &self.shape {
            Shape::Footprint { polygon } => Some(polygon),
            Shape::Point => None,
        }
    }

    fn is_finite(&self) -> bool {
        self.position.is_finite()
            && self.yaw.is_finite()
            && self.height.is_none_or(f64::is_finite)
            && self.footprint().is_none_or(|p| p.vertices().iter().all(Point2::is_finite))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Override {
    Set { node: SceneNode },
    Removed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub name: String,
    pub parent: Option<String>,
    pub overrides: BTreeMap<String, Override>,
    /// Tick at which each override was last written.
    pub stamps: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldSet {
    worlds: BTreeMap<String, World>,
}

pub fn belief_world_name(person: &str) -> String {
    format!("belief:{person}")
}

impl WorldSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// `map` world with one area node per region, place and access point and
    /// one node per obstacle, plus an empty `robot` child world.
    pub fn from_map(map: &SemanticMap) -> Self {
        let mut set = WorldSet::new();
        set.add_root(MAP_WORLD).expect("fresh set");
        let mut put = |node: SceneNode| set.set_node(MAP_WORLD, node, 0).expect("map world exists");
        let floor_of = |region: &str| map.region(region).map(|r| r.floor);
        for r in map.regions() {
            let mut n = SceneNode::area(&r.id, r.footprint.clone());
            n.floor = Some(r.floor);
            put(n);
        }
        for p in map.places() {
            let mut n = SceneNode::area(&p.id, p.footprint.clone());
            n.position = p.centroid();
            n.floor = p.floor.or_else(|| floor_of(&p.region));
            n.parent = Some(p.region.clone());
            put(n);
        }
        for a in map.access_points() {
            let mut n = SceneNode::area(&a.id, a.visible_footprint());
            n.position = a.anchors[0];
            n.parent = Some(a.connects[0].clone());
            put(n);
        }
        for o in map.obstacles() {
            let mut n = SceneNode::area(&o.id, o.footprint.clone());
            n.height = Some(o.height);
            n.floor = floor_of(&o.region);
            n.parent = Some(o.region.clone());
            put(n);
        }
        set.fork_world(MAP_WORLD, ROBOT_WORLD).expect("fresh set");
        set
    }

    pub fn add_root(&mut self, name: &str) -> Result<(), WorldError> {
        if self.worlds.contains_key(name) {
            return Err(WorldError::DuplicateName(name.to_string()));
        }
        self.worlds.insert(
            name.to_string(),
            World { name: name.to_string(), parent: None, overrides: BTreeMap::new(), stamps: BTreeMap::new() },
        );
        Ok(())
    }

    /// New empty child of `parent`.
    pub fn fork_world(&mut self, parent: &str, name: &str) -> Result<(), WorldError> {
        if !self.worlds.contains_key(parent) {
            return Err(WorldError::UnknownWorld(parent.to_string()));
        }
        if self.worlds.contains_key(name) {
            return Err(WorldError::DuplicateName(name.to_string()));
        }
        self.worlds.insert(
            name.to_string(),
            World {
                name: name.to_string(),
                parent: Some(parent.to_string()),
                overrides: BTreeMap::new(),
                stamps: BTreeMap::new(),
            },
        );
        Ok(())
    }

    pub fn world(&self, name: &str) -> Option<&World> {
        self.worlds.get(name)
    }

    pub fn world_names(&self) -> impl Iterator<Item = &str> {
        self.worlds.keys().map(String::as_str)
    }

    fn world_mut(&mut self, name: &str) -> Result<&mut World, WorldError> {
        self.worlds.get_mut(name).ok_or_else(|| WorldError::UnknownWorld(name.to_string()))
    }

    pub fn set_node(&mut self, world: &str, node: SceneNode, tick: u64) -> Result<(), WorldError> {
        if !node.is_finite() {
            return Err(WorldError::InvalidNode(node.id));
        }
        let w = self.world_mut(world)?;
        w.stamps.insert(node.id.clone(), tick);
        w.overrides.insert(node.id.clone(), Override::Set { node });
        Ok(())
    }

    /// Masks `id` in `world` (and its descendants) without touching ancestors.
    pub fn remove_node(&mut self, world: &str, id: &str, tick: u64) -> Result<(), WorldError> {
        let w = self.world_mut(world)?;
        w.stamps.insert(id.to_string(), tick);
        w.overrides.insert(id.to_string(), Override::Removed);
        Ok(())
    }

    /// Worlds from `name` up to its root.
    fn chain(&self, name: &str) -> Result<Vec<&World>, WorldError> {
        let mut out = Vec::new();
        let mut cur = Some(name);
        while let Some(n) = cur {
            let w = self.worlds.get(n).ok_or_else(|| WorldError::UnknownWorld(n.to_string()))?;
            out.push(w);
            cur = w.parent.as_deref();
        }
        Ok(out)
    }

    /// Effective node `id` in `world`, resolved through the inheritance chain.
    pub fn node(&self, world: &str, id: &str) -> Result<Option<&SceneNode>, WorldError> {
        for w in self.chain(world)? {
            match w.overrides.get(id) {
                Some(Override::Set { node }) => return Ok(Some(node)),
                Some(Override::Removed) => return Ok(None),
                None => {}
            }
        }
        Ok(None)
    }

    /// All effective nodes of `world`, by id.
    pub fn effective(&self, world: &str) -> Result<BTreeMap<String, SceneNode>, WorldError> {
        let mut out = BTreeMap::new();
        for w in self.chain(world)?.into_iter().rev() {
            for (id, o) in &w.overrides {
                match o {
                    Override::Set { node } => {
                        out.insert(id.clone(), node.clone());
                    }
                    Override::Removed => {
                        out.remove(id);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn has_belief(&self, person: &str) -> bool {
        self.worlds.contains_key(&belief_world_name(person))
    }

    /// Forks the person's belief world from `map` unless it exists.
    pub fn ensure_belief(&mut self, person: &str) -> Result<(), WorldError> {
        let name = belief_world_name(person);
        if self.worlds.contains_key(&name) {
            return Ok(());
        }
        self.fork_world(MAP_WORLD, &name)
    }

    /// Copy-on-look: when `person` looks at `target`, the target's current
    /// state in the `robot` world is copied into the person's belief world,
    /// stamped with `tick`. Returns whether a node was copied.
    pub fn update_belief(&mut self, person: &str, looking_at: Option<&str>, tick: u64) -> Result<bool, WorldError> {
        let name = belief_world_name(person);
        if !self.worlds.contains_key(&name) {
            return Err(WorldError::UnknownPerson(person.to_string()));
        }
        let Some(target) = looking_at else {
            return Ok(false);
        };
        match self.node(ROBOT_WORLD, target)?.cloned() {
            Some(node) => {
                self.set_node(&name, node, tick)?;
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Tick at which `person` last refreshed their belief about `node`.
    pub fn belief_stamp(&self, person: &str, node: &str) -> Option<u64> {
        self.worlds.get(&belief_world_name(person))?.stamps.get(node).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    fn base() -> WorldSet {
        let mut s = WorldSet::new();
        s.add_root("root").unwrap();
        s.set_node("root", SceneNode::point("a", Point2::new(1.0, 1.0)), 0).unwrap();
        s.set_node("root", SceneNode::point("b", Point2::new(2.0, 2.0)), 0).unwrap();
        s
    }

    #[test]
    fn set_then_read_round_trips() {
        let s = base();
        assert_eq!(s.node("root", "a").unwrap(), Some(&SceneNode::point("a", Point2::new(1.0, 1.0))));
    }

    #[test]
    fn child_override_leaves_parent() {
        let mut s = base();
        s.fork_world("root", "kid").unwrap();
        s.set_node("kid", SceneNode::point("a", Point2::new(9.0, 9.0)), 1).unwrap();
        assert_eq!(s.node("root", "a").unwrap().unwrap().position, Point2::new(1.0, 1.0));
        assert_eq!(s.node("kid", "a").unwrap().unwrap().position, Point2::new(9.0, 9.0));
    }

    #[test]
    fn removal_masks_in_child_only() {
        let mut s = base();
        s.fork_world("root", "kid").unwrap();
        s.remove_node("kid", "b", 1).unwrap();
        assert!(s.node("kid", "b").unwrap().is_none());
        assert!(s.node("root", "b").unwrap().is_some());
        assert_eq!(s.effective("kid").unwrap().keys().collect::<Vec<_>>(), ["a"]);
    }

    #[test]
    fn three_level_chain_resolves() {
        let mut s = base();
        s.fork_world("root", "mid").unwrap();
        s.set_node("mid", SceneNode::point("c", Point2::new(3.0, 3.0)), 1).unwrap();
        s.fork_world("mid", "leaf").unwrap();
        let e = s.effective("leaf").unwrap();
        assert_eq!(e.keys().collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(s.node("leaf", "a").unwrap(), s.node("root", "a").unwrap());
    }

    #[test]
    fn fork_errors() {
        let mut s = base();
        assert_eq!(s.fork_world("root", "root"), Err(WorldError::DuplicateName("root".into())));
        assert_eq!(s.fork_world("nope", "x"), Err(WorldError::UnknownWorld("nope".into())));
        assert_eq!(
            s.set_node("nope", SceneNode::point("a", Point2::new(0.0, 0.0)), 0),
            Err(WorldError::UnknownWorld("nope".into()))
        );
        assert!(matches!(
            s.set_node("root", SceneNode::point("a", Point2::new(f64::NAN, 0.0)), 0),
            Err(WorldError::InvalidNode(_))
        ));
    }

    #[test]
    fn belief_copy_on_look() {
        let map = SemanticMap::load(assets::MINIMALL_MAP).unwrap();
        let mut s = WorldSet::from_map(&map);
        s.ensure_belief("h1").unwrap();
        s.ensure_belief("h2").unwrap();
        let moved = SceneNode::area("pillar", Polygon::rect(Point2::new(5.0, 5.0), Point2::new(6.0, 6.0)));
        s.set_node(ROBOT_WORLD, moved.clone(), 3).unwrap();
        let old = s.node(MAP_WORLD, "pillar").unwrap().cloned();
        assert_eq!(s.node(&belief_world_name("h1"), "pillar").unwrap().cloned(), old);

        assert!(s.update_belief("h1", Some("pillar"), 4).unwrap());
        assert_eq!(s.node(&belief_world_name("h1"), "pillar").unwrap(), Some(&moved));
        assert_eq!(s.belief_stamp("h1", "pillar"), Some(4));
        // h2 untouched, and never-seen esc_1 has no override
        assert_eq!(s.node(&belief_world_name("h2"), "pillar").unwrap().cloned(), old);
        assert_eq!(s.belief_stamp("h1", "esc_1"), None);
        assert!(!s.update_belief("h1", None, 5).unwrap());
        assert_eq!(s.update_belief("ghost", Some("pillar"), 5), Err(WorldError::UnknownPerson("ghost".into())));
    }
}
