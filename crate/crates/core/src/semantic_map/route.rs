use super::{AccessKind, MapError, SemanticMap};
use crate::geometry::Point2;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteConstraints {
    #[serde(default)]
    pub no_stairs: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteStep {
    pub from_region: String,
    pub access_point: String,
    pub to_region: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub start_region: String,
    pub start: Point2,
    pub steps: Vec<RouteStep>,
    pub destination: String,
    pub total_length: f64,
}

impl Route {
    pub fn first_access_point(&self) -> Option<&str> {
        self.steps.first().map(|s| s.access_point.as_str())
    }

    pub fn uses_kind(&self, map: &SemanticMap, kind: AccessKind) -> bool {
        self.steps
            .iter()
            .any(|s| map.access_point(&s.access_point).is_some_and(|a| a.kind == kind))
    }
}

/// Search label: accumulated length plus the access points taken so far.
#[derive(Debug, Clone)]
struct Label {
    cost: f64,
    path: Vec<usize>,
    region: usize,
    at: Point2,
}

impl Label {
    fn key_cmp(&self, other: &Self, names: &[&str]) -> Ordering {
        self.cost.total_cmp(&other.cost).then_with(|| {
            let a = self.path.iter().map(|i| names[*i]);
            let b = other.path.iter().map(|i| names[*i]);
            a.cmp(b)
        })
    }
}

struct HeapEntry<'a> {
    label: Label,
    names: &'a [&'a str],
}

impl PartialEq for HeapEntry<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry<'_> {}
impl PartialOrd for HeapEntry<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (cost, access point id sequence)
        other.label.key_cmp(&self.label, self.names)
    }
}

impl SemanticMap {
    /// Shortest route from `start` (a point inside `start_region`) to the
    /// centroid of `destination`.
    ///
    /// Route length is the sum, taken left to right along the route, of the
    /// straight-line legs between consecutive anchors inside each region and
    /// the traversal length of every access point. Equal-length routes are
    /// broken by the lexicographically smallest access point id sequence.
    pub fn compute_route_from(
        &self,
        start_region: &str,
        start: Point2,
        destination: &str,
        constraints: RouteConstraints,
    ) -> Result<Route, MapError> {
        if !self.regions.contains_key(start_region) {
            return Err(MapError::UnknownRegion(start_region.to_string()));
        }
        let dest = self
            .places
            .get(destination)
            .ok_or_else(|| MapError::UnknownPlace(destination.to_string()))?;
        let dest_point = dest.centroid();

        let region_ids: Vec<&str> = self.regions.keys().map(String::as_str).collect();
        let region_index: BTreeMap<&str, usize> =
            region_ids.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        let aps: Vec<_> = self
            .access_points
            .values()
            .filter(|a| !(constraints.no_stairs && a.kind == AccessKind::Stairs))
            .collect();
        let names: Vec<&str> = aps.iter().map(|a| a.id.as_str()).collect();

        // State: the region we are in and the access point we entered through
        // (None for the start). Each is settled once.
        let entry_slots = aps.len() + 1;
        let mut settled = vec![false; region_ids.len() * entry_slots];
        let state = |region: usize, entry: Option<usize>| region * entry_slots + entry.map_or(0, |e| e + 1);

        let dest_region = region_index[dest.region.as_str()];
        let mut best: Option<Label> = None;
        let mut heap = BinaryHeap::new();
        heap.push(HeapEntry {
            label: Label { cost: 0.0, path: Vec::new(), region: region_index[start_region], at: start },
            names: &names,
        });

        while let Some(HeapEntry { label, .. }) = heap.pop() {
            if let Some(b) = &best {
                if b.key_cmp(&label, &names) != Ordering::Greater {
                    break;
                }
            }
            let s = state(label.region, label.path.last().copied());
            if settled[s] {
                continue;
            }
            settled[s] = true;

            if label.region == dest_region {
                let done = Label {
                    cost: label.cost + label.at.distance(&dest_point),
                    path: label.path.clone(),
                    region: label.region,
                    at: dest_point,
                };
                if best.as_ref().is_none_or(|b| done.key_cmp(b, &names) == Ordering::Less) {
                    best = Some(done);
                }
            }

            let here = region_ids[label.region];
            for (i, ap) in aps.iter().enumerate() {
                if label.path.contains(&i) {
                    continue;
                }
                let (Some(exit), Some(next)) = (ap.anchor_in(here), ap.other_side(here)) else {
                    continue;
                };
                let next_region = region_index[next];
                let entry = ap.anchor_in(next).expect("access point anchors both sides");
                if settled[state(next_region, Some(i))] {
                    continue;
                }
                let mut path = label.path.clone();
                path.push(i);
                heap.push(HeapEntry {
                    label: Label {
                        cost: label.cost + label.at.distance(&exit) + ap.traversal_length,
                        path,
                        region: next_region,
                        at: entry,
                    },
                    names: &names,
                });
            }
        }

        let best = best.ok_or_else(|| MapError::NoRoute {
            from: start_region.to_string(),
            to: destination.to_string(),
        })?;
        let mut steps = Vec::with_capacity(best.path.len());
        let mut region = start_region.to_string();
        for &i in &best.path {
            let ap = aps[i];
            let to = ap.other_side(&region).expect("chained route").to_string();
            steps.push(RouteStep { from_region: region, access_point: ap.id.clone(), to_region: to.clone() });
            region = to;
        }
        Ok(Route {
            start_region: start_region.to_string(),
            start,
            steps,
            destination: destination.to_string(),
            total_length: best.cost,
        })
    }

    /// [`compute_route_from`](Self::compute_route_from) starting at the
    /// region's reference point.
    pub fn compute_route(
        &self,
        start_region: &str,
        destination: &str,
        constraints: RouteConstraints,
    ) -> Result<Route, MapError> {
        let start = self
            .regions
            .get(start_region)
            .ok_or_else(|| MapError::UnknownRegion(start_region.to_string()))?
            .reference_point();
        self.compute_route_from(start_region, start, destination, constraints)
    }
}
