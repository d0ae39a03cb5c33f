//! Brute-force oracles and random case generators shared by the integration
//! tests and the acceptance target.
#![allow(dead_code)]

use guidebot_core::harness::{self, Channel, HeadCue, Look, Reply, Scenario, ScheduledGoal, ScriptedPerson, Utterance, Waypoint};
use guidebot_core::semantic_map::{AccessKind, AccessPoint, Concept, MapDocument, Place, Region};
use guidebot_core::social_state::{AttentionRecord, EngagementLedger, FusionConfig};
use guidebot_core::svp::{compute_visibility_grid, plan_svp, Landmark, SvpError};
use guidebot_core::world_model::{PersonFact, PredicateKey, PredicateName, StampedPredicate};
use guidebot_core::{Cell, OccupancyGrid, Point2, Polygon, RouteConstraints, SemanticMap, SvpConfig};
use petgraph::graph::{DiGraph, NodeIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn minimall() -> SemanticMap {
    SemanticMap::load(guidebot_core::assets::MINIMALL_MAP).unwrap()
}

// ---------------------------------------------------------------- visibility

const SUB: i64 = 1024;

fn lattice(grid: &OccupancyGrid, p: &Point2) -> (i64, i64) {
    let scale = SUB as f64 / grid.resolution;
    (((p.x - grid.origin.x) * scale).round() as i64, ((p.y - grid.origin.y) * scale).round() as i64)
}

/// Closed segment against closed cell square, exact.
fn touches(a: (i64, i64), b: (i64, i64), col: i64, row: i64) -> bool {
    let (x0, x1, y0, y1) = (col * SUB, (col + 1) * SUB, row * SUB, (row + 1) * SUB);
    if a.0.min(b.0) > x1 || a.0.max(b.0) < x0 || a.1.min(b.1) > y1 || a.1.max(b.1) < y0 {
        return false;
    }
    let (dx, dy) = ((b.0 - a.0) as i128, (b.1 - a.1) as i128);
    let side = |x: i64, y: i64| (dx * (y - a.1) as i128 - dy * (x - a.0) as i128).signum();
    let s = [side(x0, y0), side(x1, y0), side(x0, y1), side(x1, y1)];
    !(s.iter().all(|v| *v > 0) || s.iter().all(|v| *v < 0))
}

fn clear(grid: &OccupancyGrid, a: (i64, i64), b: (i64, i64)) -> bool {
    let lo = |v: i64| (v.div_euclid(SUB) - 1).max(0);
    let c_hi = ((a.0.max(b.0)).div_euclid(SUB) + 1).min(grid.width as i64 - 1);
    let r_hi = ((a.1.max(b.1)).div_euclid(SUB) + 1).min(grid.height as i64 - 1);
    for row in lo(a.1.min(b.1))..=r_hi {
        for col in lo(a.0.min(b.0))..=c_hi {
            let cell = Cell { col: col as usize, row: row as usize };
            if grid.is_blocked(cell) && touches(a, b, col, row) {
                return false;
            }
        }
    }
    true
}

/// Unoccluded ray counts per cell, row-major, by checking every cell near each ray.
pub fn brute_visibility(grid: &OccupancyGrid, samples: &[Point2]) -> Vec<u32> {
    let targets: Vec<_> = samples.iter().map(|p| lattice(grid, p)).collect();
    let mut out = Vec::with_capacity(grid.width * grid.height);
    for row in 0..grid.height {
        for col in 0..grid.width {
            if grid.is_blocked(Cell { col, row }) {
                out.push(0);
                continue;
            }
            let from = (col as i64 * SUB + SUB / 2, row as i64 * SUB + SUB / 2);
            out.push(targets.iter().filter(|t| clear(grid, from, **t)).count() as u32);
        }
    }
    out
}

pub struct GridCase {
    pub grid: OccupancyGrid,
    pub landmark: Landmark,
}

pub fn random_grid_case(rng: &mut ChaCha8Rng) -> GridCase {
    let w = rng.random_range(4..=32);
    let h = rng.random_range(4..=32);
    let res = [0.25, 0.5, 1.0][rng.random_range(0..3)];
    let origin = Point2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let mut grid = OccupancyGrid::new(origin, res, w, h);
    let density = rng.random_range(0.0..0.25);
    for row in 0..h {
        for col in 0..w {
            if rng.random_bool(density) {
                grid.set_blocked(Cell { col, row }, true);
            }
        }
    }
    let (ww, hh) = (w as f64 * res, h as f64 * res);
    let x0 = origin.x + rng.random_range(0.0..ww * 0.9);
    let y0 = origin.y + rng.random_range(0.0..hh * 0.9);
    let x1 = (x0 + rng.random_range(0.2..3.0)).min(origin.x + ww);
    let y1 = (y0 + rng.random_range(0.2..3.0)).min(origin.y + hh);
    let fp = Polygon::rect(Point2::new(x0, y0), Point2::new(x1, y1));
    GridCase { grid, landmark: Landmark::from_footprint("lm", &fp, 8) }
}

/// Compares the library grid with the brute-force one; returns mismatching cells.
pub fn visibility_mismatches(case: &GridCase) -> usize {
    let lib = compute_visibility_grid(&case.grid, &case.landmark).unwrap();
    let oracle = brute_visibility(&case.grid, &case.landmark.samples);
    assert_eq!(lib.rays, case.landmark.samples.len());
    lib.visible.iter().zip(&oracle).filter(|(a, b)| a != b).count()
}

pub fn minimall_landmarks(map: &SemanticMap) -> Vec<Landmark> {
    let k = SvpConfig::default().samples;
    let mut out: Vec<Landmark> = map.places().map(|p| Landmark::from_footprint(&p.id, &p.footprint, k)).collect();
    out.extend(map.access_points().map(|a| Landmark::from_footprint(&a.id, &a.visible_footprint(), k)));
    out
}

// ---------------------------------------------------------------- svp

fn wrapped_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

#[derive(Debug, Default)]
pub struct SvpTally {
    pub placed: usize,
    pub no_human_cell: usize,
    pub no_robot_pose: usize,
    pub violations: Vec<String>,
}

/// Checks one planning query against exhaustive search and the constraints.
pub fn check_svp(case: &GridCase, human: Point2, config: &SvpConfig, tally: &mut SvpTally) {
    let grid = &case.grid;
    let lib_vis = compute_visibility_grid(grid, &case.landmark).unwrap();
    let counts = brute_visibility(grid, &case.landmark.samples);
    let rays = case.landmark.samples.len() as f64;
    let value = |c: Cell| counts[c.row * grid.width + c.col] as f64 / rays;
    let free: Vec<Cell> = grid.cells().filter(|c| !grid.is_blocked(*c)).collect();
    let best = free
        .iter()
        .filter(|c| value(**c) >= config.v_min)
        .map(|c| config.alpha * value(*c) - config.beta * human.distance(&grid.center(*c)))
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
    match plan_svp(human, &case.landmark, &lib_vis, grid, config) {
        Ok(p) => {
            tally.placed += 1;
            let mut bad = |m: String| tally.violations.push(m);
            let Some(best) = best else { return bad("placement found but no cell reaches v_min".into()) };
            let hc = p.human_cell;
            let own = config.alpha * value(hc) - config.beta * human.distance(&grid.center(hc));
            if own != best || p.score != best {
                bad(format!("human cell score {own} (reported {}) below optimum {best}", p.score));
            }
            if grid.is_blocked(hc) || value(hc) < config.v_min {
                bad(format!("human cell {hc:?} violates v_min"));
            }
            let rc = p.robot_cell;
            if grid.is_blocked(rc) || rc == hc {
                bad(format!("robot cell {rc:?} blocked or shared"));
            }
            let (r, h) = (grid.center(rc), grid.center(hc));
            let d = r.distance(&h);
            if d < config.robot_distance_min || d > config.robot_distance_max {
                bad(format!("robot distance {d} outside band"));
            }
            let to_aim = (case.landmark.aim.y - r.y).atan2(case.landmark.aim.x - r.x);
            let to_human = (h.y - r.y).atan2(h.x - r.x);
            let phi = wrapped_gap(to_aim, to_human);
            if phi > config.phi_max + 1e-12 {
                bad(format!("phi {phi} above phi_max"));
            }
        }
        Err(SvpError::NoSharedPerspective { .. }) => {
            tally.no_human_cell += 1;
            if best.is_some() {
                tally.violations.push("planner found no human cell but one exists".into());
            }
        }
        Err(SvpError::NoRobotPose { .. }) => {
            tally.no_robot_pose += 1;
            // The planner's human cell is the optimum; any robot cell for it would do.
            let Some(best) = best else { return tally.violations.push("no robot pose reported without a human cell".into()) };
            let hc = free
                .iter()
                .copied()
                .filter(|c| value(*c) >= config.v_min)
                .find(|c| config.alpha * value(*c) - config.beta * human.distance(&grid.center(*c)) == best)
                .unwrap();
            let h = grid.center(hc);
            let exists = free.iter().any(|c| {
                let r = grid.center(*c);
                let d = r.distance(&h);
                *c != hc
                    && d >= config.robot_distance_min
                    && d <= config.robot_distance_max
                    && wrapped_gap(
                        (case.landmark.aim.y - r.y).atan2(case.landmark.aim.x - r.x),
                        (h.y - r.y).atan2(h.x - r.x),
                    ) <= config.phi_max - 1e-12
            });
            if exists {
                tally.violations.push("planner found no robot pose but one exists".into());
            }
        }
        Err(e) => tally.violations.push(format!("unexpected error {e}")),
    }
}

pub fn random_point_in(grid: &OccupancyGrid, rng: &mut ChaCha8Rng) -> Point2 {
    Point2::new(
        grid.origin.x + rng.random_range(0.0..grid.width as f64 * grid.resolution),
        grid.origin.y + rng.random_range(0.0..grid.height as f64 * grid.resolution),
    )
}

// ---------------------------------------------------------------- routes

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::rect(Point2::new(x0, y0), Point2::new(x1, y1))
}

fn inside(rng: &mut ChaCha8Rng, x0: f64, y0: f64, x1: f64, y1: f64) -> Point2 {
    Point2::new(rng.random_range(x0..x1), rng.random_range(y0..y1))
}

/// A connected map of 2..=12 rectangular regions joined by random access points.
pub fn random_topology(rng: &mut ChaCha8Rng) -> SemanticMap {
    let n = rng.random_range(2..=12);
    let kinds = [AccessKind::Stairs, AccessKind::Escalator, AccessKind::Elevator, AccessKind::Opening];
    let origin = |i: usize| (i as f64 * 20.0, 0.0);
    let mut regions = Vec::new();
    let mut places = Vec::new();
    for i in 0..n {
        let (x, y) = origin(i);
        regions.push(Region {
            id: format!("r{i:02}"),
            label: format!("Region {i}"),
            floor: rng.random_range(1..=3),
            footprint: rect(x, y, x + 10.0, y + 10.0),
            reference: Some(inside(rng, x, y, x + 10.0, y + 10.0)),
        });
        for k in 0..rng.random_range(1..=2) {
            let c = inside(rng, x + 0.5, y + 0.5, x + 8.5, y + 8.5);
            places.push(Place {
                id: format!("p{i:02}_{k}"),
                concept: "Shop".into(),
                label: format!("Shop {i} {k}"),
                floor: None,
                footprint: rect(c.x, c.y, c.x + 1.0, c.y + 1.0),
                centroid: None,
                region: format!("r{i:02}"),
                sells: vec![],
            });
        }
    }
    let mut links: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    for _ in 0..rng.random_range(0..=n) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            links.push((a, b));
        }
    }
    let access_points = links
        .iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let anchor = |rng: &mut ChaCha8Rng, i: usize| {
                let (x, y) = origin(i);
                inside(rng, x, y, x + 10.0, y + 10.0)
            };
            AccessPoint {
                id: format!("a{k:02}"),
                kind: kinds[rng.random_range(0..4)],
                connects: [format!("r{a:02}"), format!("r{b:02}")],
                anchors: [anchor(rng, *a), anchor(rng, *b)],
                traversal_length: rng.random_range(0.5..10.0),
                footprint: None,
            }
        })
        .collect();
    let doc = MapDocument {
        name: "random".into(),
        concepts: vec![
            Concept { name: "Place".into(), parents: BTreeSet::new() },
            Concept { name: "Shop".into(), parents: ["Place".to_string()].into() },
        ],
        regions,
        places,
        access_points,
        obstacles: vec![],
        occupancy: None,
        robot_home: None,
    };
    SemanticMap::from_document(doc).unwrap()
}

/// Shortest access point sequence and its length, by Dijkstra over
/// (region, entry point) states built with petgraph.
pub fn reference_route(map: &SemanticMap, start: &str, dest: &str, no_stairs: bool) -> Option<(Vec<String>, f64)> {
    let mut g: DiGraph<(String, Point2, Option<String>), f64> = DiGraph::new();
    let start_node = g.add_node((start.to_string(), map.region(start)?.reference_point(), None));
    let aps: Vec<&AccessPoint> =
        map.access_points().filter(|a| !(no_stairs && a.kind == AccessKind::Stairs)).collect();
    // crossing[a][j]: having gone through `a` from side j to side 1 - j.
    let mut crossings = Vec::new();
    for a in &aps {
        let mut pair = [NodeIndex::end(); 2];
        for j in 0..2 {
            pair[j] = g.add_node((a.connects[1 - j].clone(), a.anchors[1 - j], Some(a.id.clone())));
        }
        crossings.push(pair);
    }
    let goal_place = map.place(dest)?;
    let goal_point = goal_place.centroid();
    let goal = g.add_node((String::new(), goal_point, None));
    let states: Vec<NodeIndex> = g.node_indices().filter(|n| *n != goal).collect();
    for s in states {
        let (region, at, _) = g[s].clone();
        for (ai, a) in aps.iter().enumerate() {
            for j in 0..2 {
                if a.connects[j] == region {
                    let w = at.distance(&a.anchors[j]) + a.traversal_length;
                    g.add_edge(s, crossings[ai][j], w);
                }
            }
        }
        if region == goal_place.region {
            g.add_edge(s, goal, at.distance(&goal_point));
        }
    }
    let (cost, path) = petgraph::algo::astar(&g, start_node, |n| n == goal, |e| *e.weight(), |_| 0.0)?;
    let seq = path.iter().filter_map(|n| g[*n].2.clone()).collect();
    Some((seq, cost))
}

#[derive(Debug, Default)]
pub struct RouteTally {
    pub queries: usize,
    pub no_route: usize,
    pub stairs_used_under_no_stairs: usize,
    pub mismatches: Vec<String>,
}

pub fn check_routes(map: &SemanticMap, tally: &mut RouteTally) {
    let regions: Vec<String> = map.regions().map(|r| r.id.clone()).collect();
    let places: Vec<String> = map.places().map(|p| p.id.clone()).collect();
    for r in &regions {
        for p in &places {
            for no_stairs in [false, true] {
                tally.queries += 1;
                let got = map.compute_route(r, p, RouteConstraints { no_stairs });
                let want = reference_route(map, r, p, no_stairs);
                match (got, want) {
                    (Ok(route), Some((seq, cost))) => {
                        let ids: Vec<String> = route.steps.iter().map(|s| s.access_point.clone()).collect();
                        if ids != seq || (route.total_length - cost).abs() > 1e-9 * cost.max(1.0) {
                            tally.mismatches.push(format!(
                                "{r}->{p} no_stairs={no_stairs}: got {ids:?} {} want {seq:?} {cost}",
                                route.total_length
                            ));
                        }
                        if no_stairs && route.uses_kind(map, AccessKind::Stairs) {
                            tally.stairs_used_under_no_stairs += 1;
                        }
                    }
                    (Err(_), None) => tally.no_route += 1,
                    (got, want) => tally.mismatches.push(format!("{r}->{p} no_stairs={no_stairs}: got {got:?} want {want:?}")),
                }
            }
        }
    }
}

// ---------------------------------------------------------------- attention

pub fn nearest_centroid_distance(yaw: f64, pitch: f64, config: &FusionConfig) -> f64 {
    let mut best = f64::INFINITY;
    for c in &config.centroids {
        let d = ((yaw - c[0]).powi(2) + (pitch - c[1]).powi(2)).sqrt();
        if d < best {
            best = d;
        }
    }
    best
}

/// Threshold, then argmax of penalized attention; ties to the nearer, then smaller id.
pub fn oracle_select(records: &[AttentionRecord], ledger: &EngagementLedger, config: &FusionConfig, tick: u64) -> Option<String> {
    let penalized = |id: &str| match ledger.entries.get(id) {
        None => false,
        Some(e) => match e.until {
            None => true,
            Some(u) => tick <= u,
        },
    };
    let mut scored: Vec<(f64, f64, String)> = records
        .iter()
        .map(|r| (if penalized(&r.track) { r.p_fused * config.penalty } else { r.p_fused }, r.distance, r.track.clone()))
        .filter(|(p, _, _)| *p >= config.threshold)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    scored.into_iter().next().map(|(_, _, id)| id)
}

// ---------------------------------------------------------------- predicates

fn in_polygon(poly: &Polygon, p: &Point2) -> bool {
    let v = poly.vertices();
    let n = v.len();
    // Boundary counts as inside.
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        let within = p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y);
        if cross == 0.0 && within {
            return true;
        }
    }
    let mut odd = false;
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x) {
            odd = !odd;
        }
    }
    odd
}

pub struct Area {
    pub id: String,
    pub floor: Option<i32>,
    pub footprint: Polygon,
}

pub fn map_areas(map: &SemanticMap) -> Vec<Area> {
    let floor_of = |r: &str| map.region(r).map(|r| r.floor);
    let mut out: Vec<Area> =
        map.regions().map(|r| Area { id: r.id.clone(), floor: Some(r.floor), footprint: r.footprint.clone() }).collect();
    out.extend(map.places().map(|p| Area {
        id: p.id.clone(),
        floor: p.floor.or_else(|| floor_of(&p.region)),
        footprint: p.footprint.clone(),
    }));
    out.extend(map.access_points().map(|a| Area { id: a.id.clone(), floor: None, footprint: a.visible_footprint() }));
    out.extend(map.obstacles().iter().map(|o| Area { id: o.id.clone(), floor: floor_of(&o.region), footprint: o.footprint.clone() }));
    out
}

pub struct OracleVisibility {
    pub grid: OccupancyGrid,
    pub threshold: f64,
    /// Landmark id to (counts, rays).
    pub counts: BTreeMap<String, (Vec<u32>, usize)>,
}

impl OracleVisibility {
    fn visible(&self, landmark: &str, p: &Point2) -> bool {
        let g = &self.grid;
        let col = ((p.x - g.origin.x) / g.resolution).floor();
        let row = ((p.y - g.origin.y) / g.resolution).floor();
        if col < 0.0 || row < 0.0 || col >= g.width as f64 || row >= g.height as f64 {
            return false;
        }
        let (counts, rays) = &self.counts[landmark];
        counts[row as usize * g.width + col as usize] as f64 / *rays as f64 >= self.threshold
    }
}

/// Predicates holding for `facts`, recomputed from scratch.
pub fn oracle_holding(areas: &[Area], facts: &[PersonFact], vis: &OracleVisibility) -> BTreeSet<PredicateKey> {
    let mut out = BTreeSet::new();
    for f in facts {
        for a in areas {
            let floor_ok = match (a.floor, f.floor) {
                (Some(x), Some(y)) => x == y,
                _ => true,
            };
            if floor_ok && in_polygon(&a.footprint, &f.position) {
                out.insert(PredicateKey::new(PredicateName::IsInsideArea, &f.id, &a.id));
            }
        }
        if let Some(t) = &f.looking_at {
            out.insert(PredicateKey::new(PredicateName::IsLookingAt, &f.id, t));
            if f.speaking {
                out.insert(PredicateKey::new(PredicateName::IsSpeakingTo, &f.id, t));
            }
        }
        for l in vis.counts.keys() {
            if vis.visible(l, &f.position) {
                out.insert(PredicateKey::new(PredicateName::IsVisibleFrom, l, &f.id));
            }
        }
    }
    out
}

/// Offline interval stamping: runs separated by `hysteresis` or more missing
/// ticks are distinct; a run still open at `last_tick` has no end.
pub fn oracle_intervals(history: &[BTreeSet<PredicateKey>], hysteresis: u64) -> BTreeSet<(PredicateKey, u64, Option<u64>)> {
    let mut ticks: BTreeMap<PredicateKey, Vec<u64>> = BTreeMap::new();
    for (t, set) in history.iter().enumerate() {
        for k in set {
            ticks.entry(k.clone()).or_default().push(t as u64);
        }
    }
    let last_tick = history.len() as u64 - 1;
    let mut out = BTreeSet::new();
    for (k, ts) in ticks {
        let mut start = ts[0];
        let mut prev = ts[0];
        for &t in &ts[1..] {
            if t - prev > hysteresis {
                out.insert((k.clone(), start, Some(prev)));
                start = t;
            }
            prev = t;
        }
        let end = if last_tick - prev >= hysteresis { Some(prev) } else { None };
        out.insert((k, start, end));
    }
    out
}

pub fn stamped_set(all: &[StampedPredicate]) -> BTreeSet<(PredicateKey, u64, Option<u64>)> {
    all.iter().map(|s| (s.key(), s.t_start, s.t_end)).collect()
}

/// Per-tick facts for a few people wandering the minimall square and corridor.
pub struct FactStream {
    rng: ChaCha8Rng,
    people: Vec<(String, Point2, Option<String>, bool, i32)>,
}

impl FactStream {
    pub fn new(seed: u64, n: usize) -> Self {
        let mut rng = rng(seed);
        let people = (0..n)
            .map(|i| (format!("h{}", i + 1), inside(&mut rng, 0.5, 0.5, 39.5, 19.5), None, false, 1))
            .collect();
        FactStream { rng, people }
    }

    pub fn next_facts(&mut self) -> Vec<PersonFact> {
        let ids: Vec<String> = self.people.iter().map(|p| p.0.clone()).collect();
        let targets = ["robot", "screen", "cafe", "shoe_shop", "stairs_1"];
        for p in &mut self.people {
            let r = &mut self.rng;
            p.1 = Point2::new(
                (p.1.x + r.random_range(-0.6..0.6)).clamp(-1.0, 41.0),
                (p.1.y + r.random_range(-0.6..0.6)).clamp(-1.0, 21.0),
            );
            if r.random_bool(0.1) {
                p.2 = match r.random_range(0..4) {
                    0 => None,
                    1 => Some(ids[r.random_range(0..ids.len())].clone()),
                    _ => Some(targets[r.random_range(0..targets.len())].to_string()),
                };
                if p.2.as_deref() == Some(p.0.as_str()) {
                    p.2 = None;
                }
            }
            if r.random_bool(0.15) {
                p.3 = !p.3;
            }
            if r.random_bool(0.02) {
                p.4 = 3 - p.4;
            }
        }
        self.people
            .iter()
            .map(|(id, pos, look, speak, floor)| PersonFact {
                id: id.clone(),
                position: *pos,
                looking_at: look.clone(),
                speaking: *speak,
                floor: Some(*floor),
            })
            .collect()
    }
}

// ---------------------------------------------------------------- scenarios

pub fn golden_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.jsonl"))
}

/// Runs a bundled scenario; returns the transcript text and the wall time.
pub fn timed_run(name: &str) -> (String, f64) {
    let s = Scenario::bundled(name).unwrap();
    let t0 = Instant::now();
    let text = harness::run(&s).unwrap().to_jsonl();
    (text, t0.elapsed().as_secs_f64())
}

pub fn records(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn walkable(rng: &mut ChaCha8Rng) -> Point2 {
    // The square minus its pillar and the area right around the robot home.
    loop {
        let p = inside(rng, 1.0, 1.0, 29.0, 19.0);
        if (p.x - 15.0).abs() > 1.2 || (p.y - 10.0).abs() > 1.2 {
            return p;
        }
    }
}

/// A guidance request plus several people crossing the square.
pub fn navigation_scenario(seed: u64) -> Scenario {
    let mut rng = rng(seed ^ 0x5afe);
    let mut s = Scenario::from_json(&format!(r#"{{"name": "safety_{seed}", "seed": {seed}, "max_ticks": 300}}"#)).unwrap();
    let dest = ["the shoe shop", "the cafe", "the toy shop"][rng.random_range(0..3)];
    let mut asker = ScriptedPerson::new("asker", Point2::new(rng.random_range(11.5..13.0), rng.random_range(9.0..11.5)));
    asker.utterances.push(Utterance { tick: 3, text: format!("take me to {dest}") });
    asker.replies.push(Reply { on: "stairs".into(), text: if rng.random_bool(0.5) { "yes".into() } else { "no".into() }, delay: 4 });
    asker.replies.push(Reply { on: "understand".into(), text: "yes".into(), delay: 4 });
    s.persons.push(asker);
    for i in 0..rng.random_range(2..=5) {
        let mut p = ScriptedPerson::new(&format!("walker{i}"), walkable(&mut rng));
        p.speed = rng.random_range(0.5..1.5);
        p.follows_guidance = false;
        let mut tick = 0;
        while tick < 300 {
            p.waypoints.push(Waypoint { tick, to: walkable(&mut rng) });
            tick += rng.random_range(20..60);
        }
        p.head.push(HeadCue { tick: 0, look: Look::Away, pitch: 0.0 });
        s.persons.push(p);
    }
    // A couple of walkers head straight for the robot's path.
    let mut chaser = ScriptedPerson::new("chaser", walkable(&mut rng));
    chaser.follows_guidance = false;
    chaser.speed = 1.2;
    for k in 0..10 {
        chaser.waypoints.push(Waypoint { tick: 10 + 25 * k, to: Point2::new(rng.random_range(9.0..16.0), rng.random_range(7.0..13.0)) });
    }
    s.persons.push(chaser);
    s
}

const PHRASES: &[&str] = &[
    "hello",
    "where is the toy shop",
    "where is the cafe",
    "take me to the shoe shop",
    "can you take me to the toy shop",
    "let's play a quiz",
    "yes",
    "no",
    "1",
    "3",
    "tell me a joke",
    "what is your name",
    "where can I buy shoes",
    "bye",
    "missä on kahvila",
    "kiitos",
    "",
    "asdf qwerty",
    "where is the moon",
    "no, I have a pram",
];

/// Arbitrary but valid scenario: random people, schedules, speech and goals.
pub fn fuzz_scenario(seed: u64) -> Scenario {
    let mut rng = rng(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let max = rng.random_range(20..=500);
    let lang = if rng.random_bool(0.2) { "fi" } else { "en" };
    let mut s = Scenario::from_json(&format!(r#"{{"name": "fuzz_{seed}", "seed": {seed}, "max_ticks": {max}, "language": "{lang}"}}"#))
        .unwrap();
    let schedule = |rng: &mut ChaCha8Rng| {
        let mut ticks: Vec<u64> = (0..rng.random_range(0..6)).map(|_| rng.random_range(0..max)).collect();
        ticks.sort();
        ticks
    };
    let intervals = |rng: &mut ChaCha8Rng| {
        let mut out = Vec::new();
        let mut t = 0;
        for _ in 0..rng.random_range(0..3) {
            let a = t + rng.random_range(0..max / 2 + 1);
            let b = a + rng.random_range(0..80);
            out.push([a, b]);
            t = b + 1;
        }
        out
    };
    for i in 0..rng.random_range(0..=4) {
        let mut p = ScriptedPerson::new(&format!("p{i}"), inside(&mut rng, -2.0, -2.0, 35.0, 22.0));
        p.speed = rng.random_range(0.2..2.0);
        p.follows_guidance = rng.random_bool(0.7);
        p.looks_at_pointing = rng.random_bool(0.7);
        for tick in schedule(&mut rng) {
            p.waypoints.push(Waypoint { tick, to: inside(&mut rng, -2.0, -2.0, 42.0, 22.0) });
        }
        for tick in schedule(&mut rng) {
            let look = match rng.random_range(0..5) {
                0 => Look::Robot,
                1 => Look::Screen,
                2 => Look::Away,
                3 => Look::Yaw(rng.random_range(-4.0..4.0)),
                _ => Look::At(inside(&mut rng, 0.0, 0.0, 30.0, 20.0)),
            };
            p.head.push(HeadCue { tick, look, pitch: rng.random_range(-0.6..0.4) });
        }
        for tick in schedule(&mut rng) {
            p.utterances.push(Utterance { tick, text: PHRASES[rng.random_range(0..PHRASES.len())].into() });
        }
        for _ in 0..rng.random_range(0..4) {
            let on = ["stairs", "understand", "Question", "?", "Sure"][rng.random_range(0..5)];
            p.replies.push(Reply {
                on: on.into(),
                text: PHRASES[rng.random_range(0..PHRASES.len())].into(),
                delay: rng.random_range(0..15),
            });
        }
        p.speaking = intervals(&mut rng);
        p.absent = intervals(&mut rng);
        s.persons.push(p);
    }
    for tick in schedule(&mut rng) {
        let goal = match rng.random_range(0..6) {
            0 => json!({"kind": "guidance", "place": "toy_shop"}),
            1 => json!({"kind": "route_description", "place": "cafe"}),
            2 => json!({"kind": "quiz"}),
            3 => json!({"kind": "guidance", "place": "nowhere"}),
            4 => json!({"kind": "teleport"}),
            _ => json!(42),
        };
        s.goals.push(ScheduledGoal { tick, person: format!("h{}", rng.random_range(1..4)), goal });
    }
    s
}

/// Channel records of a transcript, parsed.
pub fn channel(text: &str, ch: &str) -> Vec<Value> {
    records(text).into_iter().filter(|r| r["channel"] == ch).collect()
}

pub fn channel_name(ch: Channel) -> String {
    serde_json::to_value(ch).unwrap().as_str().unwrap().to_string()
}
