//! Static arena geometry: walls, cliff regions and bounds.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::Error;

pub type Point = [f64; 2];

/// Wall segment between two endpoints.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment(pub Point, pub Point);

/// Simple polygon given by its vertices in order.
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon(pub Vec<Point>);

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub bounds: Bounds,
    #[cfg_attr(feature = "serde", serde(default))]
    pub walls: Vec<Segment>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub cliffs: Vec<Polygon>,
}

fn cross(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    ax * by - ay * bx
}

impl Segment {
    pub fn length(&self) -> f64 {
        libm::hypot(self.1[0] - self.0[0], self.1[1] - self.0[1])
    }

    /// Distance along the ray `origin + t * (cos, sin)` to this segment, if hit.
    pub fn ray_hit(&self, origin: Point, dir: Point) -> Option<f64> {
        let (ex, ey) = (self.1[0] - self.0[0], self.1[1] - self.0[1]);
        let denom = cross(dir[0], dir[1], ex, ey);
        if denom == 0.0 {
            return None;
        }
        let (wx, wy) = (self.0[0] - origin[0], self.0[1] - origin[1]);
        let t = cross(wx, wy, ex, ey) / denom;
        let u = cross(wx, wy, dir[0], dir[1]) / denom;
        (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
    }

    /// True when the two closed segments share at least one point.
    pub fn intersects(&self, other: &Segment) -> bool {
        let orient = |a: Point, b: Point, c: Point| cross(b[0] - a[0], b[1] - a[1], c[0] - a[0], c[1] - a[1]);
        let on_segment = |a: Point, b: Point, c: Point| {
            c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
        };
        let (p1, p2, q1, q2) = (self.0, self.1, other.0, other.1);
        let d1 = orient(q1, q2, p1);
        let d2 = orient(q1, q2, p2);
        let d3 = orient(p1, p2, q1);
        let d4 = orient(p1, p2, q2);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
            return true;
        }
        (d1 == 0.0 && on_segment(q1, q2, p1))
            || (d2 == 0.0 && on_segment(q1, q2, p2))
            || (d3 == 0.0 && on_segment(p1, p2, q1))
            || (d4 == 0.0 && on_segment(p1, p2, q2))
    }
}

impl Polygon {
    /// Crossing-number point-in-polygon test.
    pub fn contains(&self, p: Point) -> bool {
        let v = &self.0;
        let mut inside = false;
        let mut j = v.len().wrapping_sub(1);
        for i in 0..v.len() {
            let (a, b) = (v[i], v[j]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

impl World {
    /// An unbounded-looking arena with no walls or cliffs.
    pub fn empty(half_extent: f64) -> Self {
        Self {
            bounds: Bounds {
                min_x: -half_extent,
                min_y: -half_extent,
                max_x: half_extent,
                max_y: half_extent,
            },
            walls: Vec::new(),
            cliffs: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let b = &self.bounds;
        let finite = [b.min_x, b.min_y, b.max_x, b.max_y].iter().all(|v| v.is_finite());
        if !finite || b.min_x >= b.max_x || b.min_y >= b.max_y {
            return Err(Error::InvalidArgument("world bounds must be finite with min < max"));
        }
        for wall in &self.walls {
            let ok = wall.0.iter().chain(wall.1.iter()).all(|v| v.is_finite());
            if !ok || wall.length() == 0.0 {
                return Err(Error::InvalidArgument("wall segments must be finite and non-degenerate"));
            }
        }
        for cliff in &self.cliffs {
            if cliff.0.len() < 3 || cliff.0.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("cliff polygons need at least three finite vertices"));
            }
        }
        Ok(())
    }

    /// Distance to the nearest wall along a ray, if any wall is hit.
    pub fn raycast(&self, origin: Point, angle: f64) -> Option<f64> {
        let dir = [libm::cos(angle), libm::sin(angle)];
        self.walls
            .iter()
            .filter_map(|w| w.ray_hit(origin, dir))
            .fold(None, |best: Option<f64>, t| Some(best.map_or(t, |b| b.min(t))))
    }

    /// True when moving in a straight line from `from` to `to` would cross a
    /// wall or leave the bounds.
    pub fn blocks(&self, from: Point, to: Point) -> bool {
        if !self.bounds.contains(to[0], to[1]) {
            return true;
        }
        if from == to {
            return false;
        }
        let path = Segment(from, to);
        self.walls.iter().any(|w| w.intersects(&path))
    }

    pub fn in_cliff(&self, p: Point) -> bool {
        self.cliffs.iter().any(|c| c.contains(p))
    }
}
