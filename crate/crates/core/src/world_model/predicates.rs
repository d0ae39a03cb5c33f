use super::{WorldError, WorldSet};
use crate::geometry::Point2;
use crate::grid::OccupancyGrid;
use crate::svp::VisibilityGrid;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PredicateName {
    #[serde(rename = "isInsideArea")]
    IsInsideArea,
    #[serde(rename = "isLookingAt")]
    IsLookingAt,
    #[serde(rename = "isSpeakingTo")]
    IsSpeakingTo,
    #[serde(rename = "isVisibleFrom")]
    IsVisibleFrom,
}

impl PredicateName {
    pub const ALL: [PredicateName; 4] = [
        PredicateName::IsInsideArea,
        PredicateName::IsLookingAt,
        PredicateName::IsSpeakingTo,
        PredicateName::IsVisibleFrom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PredicateName::IsInsideArea => "isInsideArea",
            PredicateName::IsLookingAt => "isLookingAt",
            PredicateName::IsSpeakingTo => "isSpeakingTo",
            PredicateName::IsVisibleFrom => "isVisibleFrom",
        }
    }

    pub fn parse(s: &str) -> Option<PredicateName> {
        Self::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

impl fmt::Display for PredicateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PredicateKey {
    pub name: PredicateName,
    pub args: [String; 2],
}

impl PredicateKey {
    pub fn new(name: PredicateName, a: impl Into<String>, b: impl Into<String>) -> Self {
        PredicateKey { name, args: [a.into(), b.into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StampedPredicate {
    pub name: PredicateName,
    pub args: [String; 2],
    pub t_start: u64,
    /// `None` while the predicate still holds.
    pub t_end: Option<u64>,
}

impl StampedPredicate {
    pub fn key(&self) -> PredicateKey {
        PredicateKey { name: self.name, args: self.args.clone() }
    }

    pub fn overlaps(&self, from: u64, to: u64) -> bool {
        self.t_start <= to && self.t_end.is_none_or(|e| e >= from)
    }
}

/// What perception says about one person this tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonFact {
    pub id: String,
    pub position: Point2,
    pub looking_at: Option<String>,
    pub speaking: bool,
    /// Storey the person is on; `None` matches areas on any floor.
    #[serde(default)]
    pub floor: Option<i32>,
}

/// Visibility grids of the landmarks a person might need to see.
#[derive(Debug, Clone)]
pub struct VisibilityIndex {
    pub grid: OccupancyGrid,
    /// A landmark is visible from a cell whose value reaches this.
    pub threshold: f64,
    pub landmarks: BTreeMap<String, VisibilityGrid>,
}

impl VisibilityIndex {
    pub fn is_visible(&self, landmark: &str, at: &Point2) -> bool {
        let (Some(v), Some(cell)) = (self.landmarks.get(landmark), self.grid.cell_of(at)) else {
            return false;
        };
        v.value(cell) >= self.threshold
    }
}

/// Predicates holding this tick.
///
/// `isInsideArea(p, a)` for every footprint node of `world` containing the
/// person (boundary inclusive) on the person's floor; `isLookingAt(p, t)` when the focus of
/// attention is `t`; `isSpeakingTo(p, t)` when additionally speaking;
/// `isVisibleFrom(l, p)` when landmark `l` is visible from the person's cell.
pub fn compute_predicates(
    worlds: &WorldSet,
    world: &str,
    persons: &[PersonFact],
    visibility: Option<&VisibilityIndex>,
) -> Result<BTreeSet<PredicateKey>, WorldError> {
    let nodes = worlds.effective(world)?;
    let mut out = BTreeSet::new();
    for p in persons {
        for (id, node) in &nodes {
            let same_floor = match (node.floor, p.floor) {
                (Some(a), Some(b)) => a == b,
                _ => true,
            };
            if id != &p.id && same_floor && node.footprint().is_some_and(|f| f.contains(&p.position)) {
                out.insert(PredicateKey::new(PredicateName::IsInsideArea, &p.id, id));
            }
        }
        if let Some(t) = &p.looking_at {
            out.insert(PredicateKey::new(PredicateName::IsLookingAt, &p.id, t));
            if p.speaking {
                out.insert(PredicateKey::new(PredicateName::IsSpeakingTo, &p.id, t));
            }
        }
        if let Some(vis) = visibility {
            for l in vis.landmarks.keys() {
                if vis.is_visible(l, &p.position) {
                    out.insert(PredicateKey::new(PredicateName::IsVisibleFrom, l, &p.id));
                }
            }
        }
    }
    Ok(out)
}

/// Wildcard pattern; `None` matches anything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicatePattern {
    pub name: Option<String>,
    pub args: [Option<String>; 2],
}

impl PredicatePattern {
    pub fn new(name: &str, a: Option<&str>, b: Option<&str>) -> Self {
        PredicatePattern { name: Some(name.to_string()), args: [a.map(str::to_string), b.map(str::to_string)] }
    }

    pub fn matches(&self, name: PredicateName, args: &[String; 2]) -> bool {
        self.name.as_deref().is_none_or(|n| n == name.as_str())
            && self.args.iter().zip(args).all(|(p, a)| p.as_deref().is_none_or(|p| p == a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Live {
    start: u64,
    last: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredicateChanges {
    pub opened: Vec<StampedPredicate>,
    pub closed: Vec<StampedPredicate>,
}

/// Turns per-tick predicate sets into stamped intervals.
///
/// A predicate missing for fewer than `hysteresis` consecutive ticks stays
/// open; once it has been missing that long it closes with `t_end` = the
/// last tick it held.
#[derive(Debug, Clone)]
pub struct PredicateTracker {
    hysteresis: u64,
    live: BTreeMap<PredicateKey, Live>,
    closed: Vec<StampedPredicate>,
}

impl Default for PredicateTracker {
    fn default() -> Self {
        Self::new(2)
    }
}

impl PredicateTracker {
    pub fn new(hysteresis: u64) -> Self {
        PredicateTracker { hysteresis: hysteresis.max(1), live: BTreeMap::new(), closed: Vec::new() }
    }

    /// Feeds the predicates holding at `tick`; ticks must not decrease.
    pub fn update(&mut self, tick: u64, holding: &BTreeSet<PredicateKey>) -> PredicateChanges {
        let mut changes = PredicateChanges::default();
        for key in holding {
            match self.live.get_mut(key) {
                Some(l) => l.last = tick,
                None => {
                    self.live.insert(key.clone(), Live { start: tick, last: tick });
                    changes.opened.push(stamp(key, tick, None));
                }
            }
        }
        let expired: Vec<PredicateKey> = self
            .live
            .iter()
            .filter(|(_, l)| tick - l.last >= self.hysteresis)
            .map(|(k, _)| k.clone())
            .collect();
        for key in expired {
            let l = self.live.remove(&key).expect("listed above");
            let s = stamp(&key, l.start, Some(l.last));
            changes.closed.push(s.clone());
            self.closed.push(s);
        }
        changes
    }

    /// Closed intervals followed by the still-open ones.
    pub fn all(&self) -> Vec<StampedPredicate> {
        let mut out = self.closed.clone();
        out.extend(self.live.iter().map(|(k, l)| stamp(k, l.start, None)));
        out
    }

    pub fn is_live(&self, key: &PredicateKey) -> bool {
        self.live.contains_key(key)
    }

    pub fn live(&self) -> impl Iterator<Item = StampedPredicate> + '_ {
        self.live.iter().map(|(k, l)| stamp(k, l.start, None))
    }

    /// Stamped predicates matching `pattern` whose interval overlaps `[from, to]`,
    /// ordered by start tick then key.
    pub fn query(&self, pattern: &PredicatePattern, from: u64, to: u64) -> Vec<StampedPredicate> {
        let mut out: Vec<_> = self
            .all()
            .into_iter()
            .filter(|s| pattern.matches(s.name, &s.args) && s.overlaps(from, to))
            .collect();
        out.sort_by(|a, b| a.t_start.cmp(&b.t_start).then_with(|| a.key().cmp(&b.key())));
        out
    }
}

fn stamp(key: &PredicateKey, start: u64, end: Option<u64>) -> StampedPredicate {
    StampedPredicate { name: key.name, args: key.args.clone(), t_start: start, t_end: end }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::semantic_map::SemanticMap;
    use crate::world_model::ROBOT_WORLD;

    fn fact(id: &str, x: f64, y: f64, looking: Option<&str>, speaking: bool) -> PersonFact {
        PersonFact {
            id: id.into(),
            position: Point2::new(x, y),
            looking_at: looking.map(str::to_string),
            speaking,
            floor: Some(1),
        }
    }

    fn world() -> WorldSet {
        WorldSet::from_map(&SemanticMap::load(assets::MINIMALL_MAP).unwrap())
    }

    #[test]
    fn person_at_cafe_centroid_is_inside_cafe() {
        let preds = compute_predicates(&world(), ROBOT_WORLD, &[fact("h1", 2.25, 2.25, None, false)], None).unwrap();
        assert!(preds.contains(&PredicateKey::new(PredicateName::IsInsideArea, "h1", "cafe")));
        assert!(preds.contains(&PredicateKey::new(PredicateName::IsInsideArea, "h1", "square")));
    }

    #[test]
    fn speaking_requires_looking() {
        let w = world();
        let p = compute_predicates(&w, ROBOT_WORLD, &[fact("h1", 5.0, 5.0, Some("robot"), true)], None).unwrap();
        assert!(p.contains(&PredicateKey::new(PredicateName::IsSpeakingTo, "h1", "robot")));
        let p = compute_predicates(&w, ROBOT_WORLD, &[fact("h1", 5.0, 5.0, None, true)], None).unwrap();
        assert!(!p.iter().any(|k| k.name == PredicateName::IsSpeakingTo));
    }

    #[test]
    fn hysteresis_bridges_single_gaps() {
        let k = PredicateKey::new(PredicateName::IsLookingAt, "h1", "robot");
        let on = BTreeSet::from([k.clone()]);
        let off = BTreeSet::new();
        let mut t = PredicateTracker::default();
        let seq = [&on, &on, &off, &on, &off, &off, &on];
        for (tick, s) in seq.iter().enumerate() {
            t.update(tick as u64, s);
        }
        let all = t.all();
        assert_eq!(all.len(), 2);
        assert_eq!((all[0].t_start, all[0].t_end), (0, Some(3)));
        assert_eq!((all[1].t_start, all[1].t_end), (6, None));
    }

    #[test]
    fn query_patterns_and_points() {
        let k = PredicateKey::new(PredicateName::IsInsideArea, "h1", "square");
        let mut t = PredicateTracker::default();
        for tick in 5..=10 {
            t.update(tick, &BTreeSet::from([k.clone()]));
        }
        t.update(11, &BTreeSet::new());
        t.update(12, &BTreeSet::new());
        let pat = PredicatePattern::new("isInsideArea", None, Some("square"));
        let hits = t.query(&pat, 0, 100);
        assert_eq!(hits.len(), 1);
        assert_eq!((hits[0].t_start, hits[0].t_end), (5, Some(10)));
        assert_eq!(t.query(&pat, 10, 10).len(), 1);
        assert!(t.query(&pat, 11, 11).is_empty());
        assert!(t.query(&PredicatePattern::new("isFlying", None, None), 0, 100).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn intervals_per_key_are_ordered_and_disjoint(
                holds in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 3), 1..200),
                h in 1u64..5,
            ) {
                let keys: Vec<PredicateKey> =
                    (0..3).map(|i| PredicateKey::new(PredicateName::IsLookingAt, format!("h{i}"), "robot")).collect();
                let mut t = PredicateTracker::new(h);
                for (tick, row) in holds.iter().enumerate() {
                    let set: BTreeSet<_> = keys.iter().zip(row).filter(|(_, on)| **on).map(|(k, _)| k.clone()).collect();
                    t.update(tick as u64, &set);
                }
                for k in &keys {
                    let mut spans: Vec<_> = t.all().into_iter().filter(|s| &s.key() == k).collect();
                    spans.sort_by_key(|s| s.t_start);
                    for w in spans.windows(2) {
                        let end = w[0].t_end.expect("only the last interval may be open");
                        prop_assert!(end >= w[0].t_start);
                        prop_assert!(w[1].t_start > end + h);
                    }
                    let held = holds.iter().filter(|r| r[keys.iter().position(|x| x == k).unwrap()]).count();
                    prop_assert_eq!(spans.is_empty(), held == 0);
                }
            }
        }
    }
}
