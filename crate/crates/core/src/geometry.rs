//! Planar geometry shared by every module: points, poses, polygons, angles.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A point in the map frame, in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2 { x: v[0], y: v[1] }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing from `self` towards `other`, in radians, counter-clockwise from +x.
    pub fn bearing_to(&self, other: &Point2) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(&self, other: &Point2, t: f64) -> Point2 {
        Point2::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

/// Position plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
}

impl Pose2 {
    pub const fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose2 { x, y, yaw }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn at(p: Point2, yaw: f64) -> Self {
        Pose2 { x: p.x, y: p.y, yaw }
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Absolute angular difference, in `[0, π]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// A closed polygon given by its vertices in order (either orientation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon(pub Vec<Point2>);

impl Polygon {
    pub fn rect(min: Point2, max: Point2) -> Self {
        Polygon(vec![
            min,
            Point2::new(max.x, min.y),
            max,
            Point2::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.0
    }

    fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.0.len();
        (0..n).map(move |i| (self.0[i], self.0[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| a.x * b.y - b.x * a.y).sum::<f64>() / 2.0
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2 {
        let a = self.signed_area();
        if a.abs() < 1e-12 {
            let n = self.0.len().max(1) as f64;
            let (sx, sy) = self.0.iter().fold((0.0, 0.0), |s, p| (s.0 + p.x, s.1 + p.y));
            return Point2::new(sx / n, sy / n);
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let cross = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * cross;
            cy += (p.y + q.y) * cross;
        }
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Point-in-polygon test where the boundary counts as inside.
    pub fn contains(&self, p: &Point2) -> bool {
        const EPS: f64 = 1e-9;
        let mut inside = false;
        for (a, b) in self.edges() {
            if point_on_segment(p, &a, &b, EPS) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(&b)).sum()
    }

    /// `k` points evenly spaced along the boundary, starting at the first vertex.
    pub fn boundary_samples(&self, k: usize) -> Vec<Point2> {
        let total = self.perimeter();
        if k == 0 || self.0.is_empty() {
            return Vec::new();
        }
        if total <= 0.0 {
            return vec![self.0[0]; k];
        }
        let step = total / k as f64;
        let edges: Vec<(Point2, Point2, f64)> =
            self.edges().map(|(a, b)| (a, b, a.distance(&b))).collect();
        let last = edges.len() - 1;
        (0..k)
            .map(|i| {
                let mut s = step * i as f64;
                for (j, &(a, b, len)) in edges.iter().enumerate() {
                    if s <= len || j == last {
                        let t = if len > 0.0 { (s / len).min(1.0) } else { 0.0 };
                        return a.lerp(&b, t);
                    }
                    s -= len;
                }
                edges[last].1
            })
            .collect()
    }

    /// True when no two non-adjacent edges intersect and there are at least 3 vertices.
    pub fn is_simple(&self) -> bool {
        let n = self.0.len();
        if n < 3 || self.signed_area().abs() < 1e-12 {
            return false;
        }
        let e: Vec<(Point2, Point2)> = self.edges().collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(&e[i].0, &e[i].1, &e[j].0, &e[j].1) {
                    return false;
                }
            }
        }
        true
    }

    pub fn bounds(&self) -> (Point2, Point2) {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.0 {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        (min, max)
    }
}

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn point_on_segment(p: &Point2, a: &Point2, b: &Point2, eps: f64) -> bool {
    cross(a, b, p).abs() <= eps * a.distance(b).max(1.0)
        && p.x >= a.x.min(b.x) - eps
        && p.x <= a.x.max(b.x) + eps
        && p.y >= a.y.min(b.y) - eps
        && p.y <= a.y.max(b.y) + eps
}

fn segments_intersect(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    point_on_segment(a, c, d, 1e-12)
        || point_on_segment(b, c, d, 1e-12)
        || point_on_segment(c, a, b, 1e-12)
        || point_on_segment(d, a, b, 1e-12)
}

/// Rounds to 4 decimals; used for every float written to a transcript so
/// byte-level output does not depend on last-ulp libm differences.
pub fn round4(x: f64) -> f64 {
    let r = (x * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_range() {
        for k in -20..20 {
            let a = k as f64 * 0.7;
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI);
            assert!(((a - w) / (2.0 * PI)).fract().abs() < 1e-9 || ((a - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-9);
        }
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
    }

    #[test]
    fn boundary_counts_as_inside() {
        let sq = Polygon::rect(Point2::new(0.0, 0.0), Point2::new(2.0, 2.0));
        assert!(sq.contains(&Point2::new(1.0, 1.0)));
        assert!(sq.contains(&Point2::new(0.0, 1.0)));
        assert!(sq.contains(&Point2::new(2.0, 2.0)));
        assert!(!sq.contains(&Point2::new(2.0001, 1.0)));
    }

    #[test]
    fn centroid_of_rect() {
        let r = Polygon::rect(Point2::new(26.0, 16.0), Point2::new(29.5, 19.5));
        let c = r.centroid();
        assert!((c.x - 27.75).abs() < 1e-12 && (c.y - 17.75).abs() < 1e-12);
    }

    #[test]
    fn eight_samples_on_rect() {
        let r = Polygon::rect(Point2::new(0.0, 0.0), Point2::new(4.0, 4.0));
        let s = r.boundary_samples(8);
        let expect = [
            (0.0, 0.0),
            (2.0, 0.0),
            (4.0, 0.0),
            (4.0, 2.0),
            (4.0, 4.0),
            (2.0, 4.0),
            (0.0, 4.0),
            (0.0, 2.0),
        ];
        for (p, e) in s.iter().zip(expect) {
            assert!((p.x - e.0).abs() < 1e-12 && (p.y - e.1).abs() < 1e-12, "{p:?} vs {e:?}");
        }
    }

    #[test]
    fn bowtie_is_not_simple() {
        let p = Polygon(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ]);
        assert!(!p.is_simple());
        assert!(Polygon::rect(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)).is_simple());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn wrap_stays_in_half_open_range(a in -100.0f64..100.0) {
                let w = wrap_angle(a);
                prop_assert!(w > -PI && w <= PI);
                prop_assert!(((a - w) / (2.0 * PI) - ((a - w) / (2.0 * PI)).round()).abs() < 1e-9);
            }

            #[test]
            fn round4_is_idempotent(x in -1e6f64..1e6) {
                let r = round4(x);
                prop_assert_eq!(round4(r), r);
                prop_assert!((r - x).abs() <= 0.5e-4 + 1e-9);
            }

            #[test]
            fn rect_contains_its_samples(x in -50.0f64..50.0, y in -50.0f64..50.0, w in 0.1f64..20.0, h in 0.1f64..20.0, k in 1usize..40) {
                let r = Polygon::rect(Point2::new(x, y), Point2::new(x + w, y + h));
                let c = r.centroid();
                prop_assert!(r.contains(&c));
                for p in r.boundary_samples(k) {
                    prop_assert!(p.x >= x - 1e-9 && p.x <= x + w + 1e-9 && p.y >= y - 1e-9 && p.y <= y + h + 1e-9);
                }
            }
        }
    }
}
