//! Exact supercover traversal of a segment across grid cells.
//!
//! Endpoints are snapped to a lattice of [`SUBDIV`] units per cell; after
//! that every decision is integer arithmetic, so results never depend on
//! floating-point rounding. A cell is traversed iff its closed square meets
//! the closed segment: corner crossings touch all four cells around the
//! corner, and an endpoint lying on a cell edge touches both sides.

use crate::geometry::Point2;
use crate::grid::{Cell, OccupancyGrid};

/// Lattice subdivisions per cell edge.
pub const SUBDIV: i64 = 1024;

/// A point in lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticePoint {
    pub x: i64,
    pub y: i64,
}

pub fn to_lattice(grid: &OccupancyGrid, p: &Point2) -> LatticePoint {
    let scale = SUBDIV as f64 / grid.resolution;
    LatticePoint {
        x: ((p.x - grid.origin.x) * scale).round() as i64,
        y: ((p.y - grid.origin.y) * scale).round() as i64,
    }
}

pub fn cell_center_lattice(cell: Cell) -> LatticePoint {
    LatticePoint {
        x: cell.col as i64 * SUBDIV + SUBDIV / 2,
        y: cell.row as i64 * SUBDIV + SUBDIV / 2,
    }
}

fn div_floor(n: i128, d: i128) -> i128 {
    debug_assert!(d > 0);
    let q = n / d;
    if n % d != 0 && n < 0 {
        q - 1
    } else {
        q
    }
}

fn div_ceil(n: i128, d: i128) -> i128 {
    -div_floor(-n, d)
}

/// Visits every in-grid cell the segment touches, column by column. Stops
/// early when `visit` returns `false`; returns whether the walk completed.
pub fn traverse(
    grid: &OccupancyGrid,
    a: LatticePoint,
    b: LatticePoint,
    mut visit: impl FnMut(Cell) -> bool,
) -> bool {
    let s = SUBDIV as i128;
    let (p, q) = if a.x <= b.x { (a, b) } else { (b, a) };
    let (x0, y0, x1, y1) = (p.x as i128, p.y as i128, q.x as i128, q.y as i128);
    let dx = x1 - x0;
    let dy = y1 - y0;
    let width = grid.width as i128;
    let height = grid.height as i128;

    let mut rows = |col: i128, lo_num: i128, hi_num: i128, den: i128| -> bool {
        // rows r with r*S <= hi and (r+1)*S >= lo, where lo/hi = num/den
        if col < 0 || col >= width {
            return true;
        }
        let r0 = (div_ceil(lo_num, den * s) - 1).max(0);
        let r1 = div_floor(hi_num, den * s).min(height - 1);
        let mut r = r0;
        while r <= r1 {
            if !visit(Cell::new(col as usize, r as usize)) {
                return false;
            }
            r += 1;
        }
        true
    };

    let c_first = div_ceil(x0, s) - 1;
    let c_last = div_floor(x1, s);
    if dx == 0 {
        let (lo, hi) = (y0.min(y1), y0.max(y1));
        for col in c_first..=c_last {
            if !rows(col, lo, hi, 1) {
                return false;
            }
        }
        return true;
    }
    for col in c_first.max(-1)..=c_last.min(width) {
        let xa = x0.max(col * s);
        let xb = x1.min((col + 1) * s);
        if xa > xb {
            continue;
        }
        // y(x) = (y0*dx + (x - x0)*dy) / dx
        let ya = y0 * dx + (xa - x0) * dy;
        let yb = y0 * dx + (xb - x0) * dy;
        if !rows(col, ya.min(yb), ya.max(yb), dx) {
            return false;
        }
    }
    true
}

/// True when the segment reaches `b` without touching a blocked cell.
pub fn line_of_sight(grid: &OccupancyGrid, a: LatticePoint, b: LatticePoint) -> bool {
    traverse(grid, a, b, |cell| grid.is_free(cell))
}
