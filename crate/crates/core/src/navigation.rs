//! Human-aware navigation stand-in: 8-connected global planning on the
//! inflated occupancy grid, and a local stepper that re-plans every call in a
//! window around the robot with a social cost around each person, advances at
//! most one speed-limited step, and stops rather than come closer than
//! `d_safe` to anyone.

use crate::geometry::{Point2, Pose2};
use crate::grid::{Cell, OccupancyGrid};
use serde::{Deserialize, Serialize};
use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::f64::consts::SQRT_2;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NavError {
    #[error("start lies outside the grid or inside an inflated obstacle")]
    StartBlocked,
    #[error("goal lies outside the grid or inside an inflated obstacle")]
    GoalBlocked,
    #[error("no path between start and goal")]
    NoPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavConfig {
    pub robot_radius: f64,
    pub d_safe: f64,
    pub social_radius: f64,
    pub social_weight: f64,
    /// m/s
    pub max_speed: f64,
    /// s
    pub control_period: f64,
    /// Extra clearance the local planner keeps beyond `d_safe`.
    pub keepout_margin: f64,
    /// Local planning window radius, m.
    pub window: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        NavConfig {
            robot_radius: 0.3,
            d_safe: 0.5,
            social_radius: 1.5,
            social_weight: 2.0,
            max_speed: 0.5,
            control_period: 0.1,
            keepout_margin: 0.15,
            window: 3.0,
        }
    }
}

/// Path cost as counts of straight and diagonal moves. Ordered by exact
/// value `straight + diagonal * sqrt(2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepCount {
    pub straight: u32,
    pub diagonal: u32,
}

impl StepCount {
    pub fn length(&self, resolution: f64) -> f64 {
        resolution * (self.straight as f64 + self.diagonal as f64 * SQRT_2)
    }

    fn plus(self, diagonal: bool) -> StepCount {
        if diagonal {
            StepCount { diagonal: self.diagonal + 1, ..self }
        } else {
            StepCount { straight: self.straight + 1, ..self }
        }
    }
}

impl Ord for StepCount {
    fn cmp(&self, other: &Self) -> Ordering {
        // sign of a + b*sqrt(2)
        let a = self.straight as i64 - other.straight as i64;
        let b = self.diagonal as i64 - other.diagonal as i64;
        match (a.signum(), b.signum()) {
            (0, 0) => Ordering::Equal,
            (x, y) if x >= 0 && y >= 0 => Ordering::Greater,
            (x, y) if x <= 0 && y <= 0 => Ordering::Less,
            (x, _) => {
                let dominant = (a * a).cmp(&(2 * b * b));
                if x > 0 {
                    dominant
                } else {
                    dominant.reverse()
                }
            }
        }
    }
}

impl PartialOrd for StepCount {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<Cell>,
    /// Cell centers, each facing the next one.
    pub poses: Vec<Pose2>,
    pub steps: StepCount,
    pub length: f64,
}

impl Path {
    pub fn points(&self) -> Vec<Point2> {
        self.poses.iter().map(Pose2::position).collect()
    }

    pub fn goal(&self) -> Point2 {
        self.poses.last().expect("paths are never empty").position()
    }
}

fn poses_for(grid: &OccupancyGrid, cells: &[Cell]) -> Vec<Pose2> {
    let pts: Vec<Point2> = cells.iter().map(|c| grid.center(*c)).collect();
    let mut yaw = 0.0;
    (0..pts.len())
        .map(|i| {
            if i + 1 < pts.len() {
                yaw = pts[i].bearing_to(&pts[i + 1]);
            }
            Pose2::at(pts[i], yaw)
        })
        .collect()
}

/// Shortest 8-connected path between the cells of `start` and `goal` on the
/// grid inflated by the robot radius. Equal-cost alternatives resolve by
/// settling cells in (cost, row-major index) order and relaxing neighbors in
/// row-major order.
pub fn plan_global(grid: &OccupancyGrid, start: Point2, goal: Point2, config: &NavConfig) -> Result<Path, NavError> {
    let inflated = grid.inflated(config.robot_radius);
    plan_on(&inflated, start, goal)
}

/// [`plan_global`] on a grid that is already inflated.
pub fn plan_on(grid: &OccupancyGrid, start: Point2, goal: Point2) -> Result<Path, NavError> {
    let s = grid.cell_of(&start).filter(|c| grid.is_free(*c)).ok_or(NavError::StartBlocked)?;
    let g = grid.cell_of(&goal).filter(|c| grid.is_free(*c)).ok_or(NavError::GoalBlocked)?;
    let n = grid.len();
    let mut best: Vec<Option<StepCount>> = vec![None; n];
    let mut prev: Vec<usize> = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[grid.index(s)] = Some(StepCount::default());
    heap.push(Reverse((StepCount::default(), grid.index(s))));
    while let Some(Reverse((cost, i))) = heap.pop() {
        if done[i] {
            continue;
        }
        done[i] = true;
        if i == grid.index(g) {
            break;
        }
        for (nb, diag) in grid.neighbors8(grid.cell_at(i)) {
            let j = grid.index(nb);
            let c = cost.plus(diag);
            if !done[j] && best[j].is_none_or(|b| c < b) {
                best[j] = Some(c);
                prev[j] = i;
                heap.push(Reverse((c, j)));
            }
        }
    }
    let steps = best[grid.index(g)].filter(|_| done[grid.index(g)]).ok_or(NavError::NoPath)?;
    let mut cells = vec![g];
    let mut i = grid.index(g);
    while i != grid.index(s) {
        i = prev[i];
        cells.push(grid.cell_at(i));
    }
    cells.reverse();
    Ok(Path { poses: poses_for(grid, &cells), length: steps.length(grid.resolution), steps, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalStep {
    pub pose: Pose2,
    /// Polyline the step was taken along, starting at the old position.
    pub local_path: Vec<Point2>,
    pub replanned: bool,
    pub stopped: bool,
}

fn closest_on_segment(p: &Point2, a: &Point2, b: &Point2) -> (Point2, f64) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    let q = a.lerp(b, t);
    (q, q.distance(p))
}

/// Index of the path segment nearest `p` (first on ties) and the projection.
fn project(points: &[Point2], p: &Point2) -> (usize, Point2, f64) {
    if points.len() == 1 {
        return (0, points[0], points[0].distance(p));
    }
    let mut best = (0, points[0], f64::INFINITY);
    for i in 0..points.len() - 1 {
        let (q, d) = closest_on_segment(p, &points[i], &points[i + 1]);
        if d < best.2 {
            best = (i, q, d);
        }
    }
    best
}

/// Walks `dist` along the polyline starting at `pts[0]`.
fn advance(pts: &[Point2], dist: f64) -> Point2 {
    let mut left = dist;
    for w in pts.windows(2) {
        let seg = w[0].distance(&w[1]);
        if seg >= left {
            return if seg == 0.0 { w[1] } else { w[0].lerp(&w[1], left / seg) };
        }
        left -= seg;
    }
    *pts.last().expect("non-empty polyline")
}

/// Linear social cost at `p`: sum over people of `max(0, 1 - d / radius)`.
pub fn social_cost(p: &Point2, humans: &[Point2], radius: f64) -> f64 {
    humans.iter().map(|h| (1.0 - p.distance(h) / radius).max(0.0)).sum()
}

/// One control step toward the end of `path`.
///
/// With nobody within reach of the planning window and the robot on the
/// path, the robot advances along the global path. Otherwise a local plan is
/// recomputed over the window: cells within `d_safe + keepout_margin` of a
/// person are closed, move costs grow with [`social_cost`], and the target is
/// the farthest reachable pose of the global path. The step is at most
/// `max_speed * dt` long and is dropped (the robot stops) if it would end
/// closer than `d_safe` to any person.
pub fn step_local(
    pose: &Pose2,
    path: &Path,
    humans: &[Point2],
    grid: &OccupancyGrid,
    config: &NavConfig,
    dt: f64,
) -> LocalStep {
    let inflated = grid.inflated(config.robot_radius);
    step_local_on(pose, path, humans, &inflated, config, dt)
}

/// [`step_local`] on a grid that is already inflated.
pub fn step_local_on(
    pose: &Pose2,
    path: &Path,
    humans: &[Point2],
    grid: &OccupancyGrid,
    config: &NavConfig,
    dt: f64,
) -> LocalStep {
    let here = pose.position();
    let step = (config.max_speed * dt).max(0.0);
    let hold = |replanned| LocalStep { pose: *pose, local_path: vec![here], replanned, stopped: true };
    let pts = path.points();
    let (seg, proj, off) = project(&pts, &here);
    let goal = path.goal();
    if here.distance(&goal) <= 1e-9 {
        return LocalStep { pose: *pose, local_path: vec![here], replanned: false, stopped: false };
    }

    let reach = config.window + config.social_radius + step;
    let crowded = humans.iter().any(|h| h.distance(&here) <= reach);
    let (polyline, replanned) = if !crowded && off <= 1e-9 {
        let mut line = vec![proj];
        line.extend_from_slice(&pts[seg + 1..]);
        (line, false)
    } else {
        match local_plan(here, &pts, seg, humans, grid, config) {
            Some(line) => (line, true),
            None => return hold(true),
        }
    };
    let next = advance(&polyline, step);
    if humans.iter().any(|h| next.distance(h) < config.d_safe) {
        return hold(replanned);
    }
    let moved = next.distance(&here);
    let yaw = if moved > 1e-12 { here.bearing_to(&next) } else { pose.yaw };
    LocalStep { pose: Pose2::at(next, yaw), local_path: polyline, replanned, stopped: moved <= 1e-12 }
}

fn local_plan(
    here: Point2,
    pts: &[Point2],
    seg: usize,
    humans: &[Point2],
    grid: &OccupancyGrid,
    config: &NavConfig,
) -> Option<Vec<Point2>> {
    let start = grid.cell_of(&here)?;
    let goal = *pts.last()?;
    if grid.cell_of(&goal) == Some(start) {
        return Some(vec![here, goal]);
    }
    let keepout = config.d_safe + config.keepout_margin;
    let usable = |c: Cell| {
        let p = grid.center(c);
        grid.is_free(c) && p.distance(&here) <= config.window && humans.iter().all(|h| p.distance(h) >= keepout)
    };
    // Dijkstra over the window; the start cell is always allowed.
    let mut dist: BTreeMap<Cell, (f64, Cell)> = BTreeMap::new();
    let mut done: BTreeMap<Cell, ()> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(start, (0.0, start));
    heap.push(Reverse(Key(0.0, start)));
    while let Some(Reverse(Key(d, c))) = heap.pop() {
        if done.insert(c, ()).is_some() {
            continue;
        }
        let a = grid.center(c);
        for (nb, diag) in grid.neighbors8(c) {
            if !usable(nb) || done.contains_key(&nb) {
                continue;
            }
            let b = grid.center(nb);
            let len = if diag { SQRT_2 } else { 1.0 } * grid.resolution;
            let mid = a.lerp(&b, 0.5);
            let cost = d + len * (1.0 + config.social_weight * social_cost(&mid, humans, config.social_radius));
            if dist.get(&nb).is_none_or(|(old, _)| cost < *old) {
                dist.insert(nb, (cost, c));
                heap.push(Reverse(Key(cost, nb)));
            }
        }
    }
    // farthest global path point (from the current segment on) that was reached
    let target = (seg..pts.len()).rev().find_map(|i| {
        let c = grid.cell_of(&pts[i])?;
        (c != start && done.contains_key(&c)).then_some((i, c))
    });
    let (_, target) = target?;
    let mut cells = vec![target];
    let mut c = target;
    while c != start {
        c = dist[&c].1;
        cells.push(c);
    }
    cells.reverse();
    let mut line = vec![here];
    line.extend(cells[1..].iter().map(|c| grid.center(*c)));
    Some(line)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, Cell);

impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| (self.1.row, self.1.col).cmp(&(other.1.row, other.1.col)))
    }
}
