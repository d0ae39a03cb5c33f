//! Occupancy grid: a flat 2D occluder/obstacle raster over one region.

use crate::geometry::{Point2, Polygon};
use serde::{Deserialize, Serialize};

/// Grid cell address, `(col, row)`. Row 0 is the `origin.y` edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Cell { col, row }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    blocked: Vec<bool>,
}

impl OccupancyGrid {
    /// An all-free grid.
    ///
    /// Panics if `resolution` is not positive or a dimension is zero.
    pub fn new(origin: Point2, resolution: f64, width: usize, height: usize) -> Self {
        assert!(resolution > 0.0, "grid resolution must be positive");
        assert!(width >= 1 && height >= 1, "grid dimensions must be >= 1");
        OccupancyGrid {
            origin,
            resolution,
            width,
            height,
            blocked: vec![false; width * height],
        }
    }

    /// Marks every cell whose center lies inside (or on) one of `obstacles`.
    pub fn with_obstacles<'a>(mut self, obstacles: impl IntoIterator<Item = &'a Polygon>) -> Self {
        for poly in obstacles {
            let (min, max) = poly.bounds();
            for cell in self.cells_in_box(min, max) {
                if poly.contains(&self.center(cell)) {
                    self.set_blocked(cell, true);
                }
            }
        }
        self
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn contains_cell(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked[self.index(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.is_blocked(cell)
    }

    pub fn set_blocked(&mut self, cell: Cell, blocked: bool) {
        let i = self.index(cell);
        self.blocked[i] = blocked;
    }

    pub fn center(&self, cell: Cell) -> Point2 {
        Point2::new(
            self.origin.x + (cell.col as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    /// The cell containing `p`, if inside the grid. Cells are half-open
    /// `[lo, hi)` along both axes.
    pub fn cell_of(&self, p: &Point2) -> Option<Cell> {
        let c = ((p.x - self.origin.x) / self.resolution).floor();
        let r = ((p.y - self.origin.y) / self.resolution).floor();
        if !c.is_finite() || !r.is_finite() {
            return None;
        }
        let (c, r) = (c as i64, r as i64);
        self.contains_cell(c, r).then(|| Cell::new(c as usize, r as usize))
    }

    /// Row-major iterator over all cells.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|i| self.cell_at(i))
    }

    /// Cells overlapping the axis-aligned box (a superset of the cells whose
    /// centers fall inside it), row-major.
    pub fn cells_in_box(&self, min: Point2, max: Point2) -> Vec<Cell> {
        let lo = |v: f64, o: f64| ((v - o) / self.resolution).floor().max(0.0) as usize;
        let hi = |v: f64, o: f64| (((v - o) / self.resolution).floor() + 1.0).max(0.0) as usize;
        let (c0, c1) = (lo(min.x, self.origin.x), hi(max.x, self.origin.x).min(self.width));
        let (r0, r1) = (lo(min.y, self.origin.y), hi(max.y, self.origin.y).min(self.height));
        let mut out = Vec::new();
        for row in r0..r1 {
            for col in c0..c1 {
                out.push(Cell::new(col, row));
            }
        }
        out
    }

    /// 8-connected neighbors in row-major order. Diagonal moves that would
    /// cut the corner of a blocked cell are excluded.
    pub fn neighbors8(&self, cell: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
        const OFFSETS: [(i64, i64); 8] =
            [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        OFFSETS.iter().filter_map(move |&(dc, dr)| {
            let c = cell.col as i64 + dc;
            let r = cell.row as i64 + dr;
            if !self.contains_cell(c, r) {
                return None;
            }
            let n = Cell::new(c as usize, r as usize);
            if self.is_blocked(n) {
                return None;
            }
            let diagonal = dc != 0 && dr != 0;
            if diagonal {
                let a = Cell::new(c as usize, cell.row);
                let b = Cell::new(cell.col, r as usize);
                if self.is_blocked(a) || self.is_blocked(b) {
                    return None;
                }
            }
            Some((n, diagonal))
        })
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }

    /// Copy with every cell whose center is closer than `radius` to a blocked
    /// cell's square also marked blocked.
    pub fn inflated(&self, radius: f64) -> OccupancyGrid {
        let mut out = self.clone();
        if radius <= 0.0 {
            return out;
        }
        let reach = (radius / self.resolution).ceil() as i64 + 1;
        for cell in self.cells().filter(|c| self.is_blocked(*c)) {
            let lo = Point2::new(
                self.origin.x + cell.col as f64 * self.resolution,
                self.origin.y + cell.row as f64 * self.resolution,
            );
            let hi = Point2::new(lo.x + self.resolution, lo.y + self.resolution);
            for dr in -reach..=reach {
                for dc in -reach..=reach {
                    let (c, r) = (cell.col as i64 + dc, cell.row as i64 + dr);
                    if !self.contains_cell(c, r) {
                        continue;
                    }
                    let n = Cell::new(c as usize, r as usize);
                    let p = self.center(n);
                    let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
                    let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
                    if dx.hypot(dy) < radius {
                        out.set_blocked(n, true);
                    }
                }
            }
        }
        out
    }
}
