//! Log-odds occupancy grid built from range scans taken at known poses.

use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, cos, floor, sin};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error};
use crate::kinematics::Pose2D;
use crate::plant::{Bounds, LidarScan, Point};

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// Cell edge length in meters.
    pub resolution: f64,
    /// Log-odds added to a cell that ends a beam.
    pub l_occ: f64,
    /// Log-odds added to every cell a beam passes through.
    pub l_free: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub occ_threshold: f64,
    pub free_threshold: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 0.05,
            l_occ: 0.85,
            l_free: -0.4,
            l_min: -10.0,
            l_max: 10.0,
            occ_threshold: 2.0,
            free_threshold: -2.0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), Error> {
        ensure_positive(self.resolution, "grid resolution must be positive")?;
        if !(self.l_min < 0.0 && self.l_max > 0.0) {
            return Err(Error::InvalidArgument("log-odds clamp must straddle zero"));
        }
        if !(self.l_free < 0.0 && self.l_occ > 0.0) {
            return Err(Error::InvalidArgument("l_free must be negative and l_occ positive"));
        }
        if self.free_threshold > self.occ_threshold {
            return Err(Error::InvalidArgument("free threshold above occupied threshold"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Occupied,
    Free,
    Unknown,
}

/// Row-major raster of log-odds values; row 0 is the lowest `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: f64,
    /// World pose of the outer corner of cell `(0, 0)`.
    pub origin: Pose2D,
    pub width: usize,
    pub height: usize,
    pub l_min: f64,
    pub l_max: f64,
    cells: Vec<f64>,
}

impl OccupancyGrid {
    pub fn new(resolution: f64, origin: Pose2D, width: usize, height: usize, l_min: f64, l_max: f64) -> Result<Self, Error> {
        ensure_positive(resolution, "grid resolution must be positive")?;
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("grid must have at least one cell"));
        }
        if !(l_min <= 0.0 && l_max >= 0.0) {
            return Err(Error::InvalidArgument("log-odds clamp must contain zero"));
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
            l_min,
            l_max,
            cells: vec![0.0; width * height],
        })
    }

    /// Grid covering `bounds`, shifted by half a cell so that walls on
    /// round coordinates run through cell centres.
    pub fn covering(bounds: &Bounds, cfg: &GridConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let res = cfg.resolution;
        let origin = Pose2D::new(bounds.min_x - res / 2.0, bounds.min_y - res / 2.0, 0.0);
        let width = ceil((bounds.max_x - bounds.min_x) / res) as usize + 1;
        let height = ceil((bounds.max_y - bounds.min_y) / res) as usize + 1;
        OccupancyGrid::new(res, origin, width, height, cfg.l_min, cfg.l_max)
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn get(&self, cx: usize, cy: usize) -> f64 {
        self.cells[cy * self.width + cx]
    }

    /// Adds `delta` to a cell and clamps it into `[l_min, l_max]`.
    pub fn add(&mut self, cx: usize, cy: usize, delta: f64) {
        let cell = &mut self.cells[cy * self.width + cx];
        *cell = (*cell + delta).clamp(self.l_min, self.l_max);
    }

    pub fn classify(&self, cx: usize, cy: usize, cfg: &GridConfig) -> CellState {
        let l = self.get(cx, cy);
        if l > cfg.occ_threshold {
            CellState::Occupied
        } else if l < cfg.free_threshold {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }

    /// Continuous cell coordinates of a world point.
    pub fn world_to_grid(&self, p: Point) -> [f64; 2] {
        let (dx, dy) = (p[0] - self.origin.x, p[1] - self.origin.y);
        let (s, c) = (sin(self.origin.theta), cos(self.origin.theta));
        [(c * dx + s * dy) / self.resolution, (-s * dx + c * dy) / self.resolution]
    }

    pub fn cell_center(&self, cx: usize, cy: usize) -> Point {
        let gx = (cx as f64 + 0.5) * self.resolution;
        let gy = (cy as f64 + 0.5) * self.resolution;
        let (s, c) = (sin(self.origin.theta), cos(self.origin.theta));
        [self.origin.x + c * gx - s * gy, self.origin.y + s * gx + c * gy]
    }

    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let g = self.world_to_grid(p);
        let (fx, fy) = (floor(g[0]), floor(g[1]));
        if fx < 0.0 || fy < 0.0 || fx >= self.width as f64 || fy >= self.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }
}

/// Clips the segment `a -> b` to `[0, w] x [0, h]`. Returns the clipped
/// endpoints and whether `b` itself was cut off.
fn clip(a: [f64; 2], b: [f64; 2], w: f64, h: f64) -> Option<([f64; 2], [f64; 2], bool)> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let checks = [(-d[0], a[0]), (d[0], w - a[0]), (-d[1], a[1]), (d[1], h - a[1])];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| [a[0] + t * d[0], a[1] + t * d[1]];
    Some((at(t0), at(t1), t1 < 1.0))
}

fn traverse(grid: &OccupancyGrid, from: Point, to: Point) -> (Vec<(usize, usize)>, bool) {
    let (w, h) = (grid.width as f64, grid.height as f64);
    let Some((a, b, end_clipped)) = clip(grid.world_to_grid(from), grid.world_to_grid(to), w, h) else {
        return (Vec::new(), true);
    };
    let cell = |p: [f64; 2]| -> (i64, i64) {
        (
            (floor(p[0]) as i64).clamp(0, grid.width as i64 - 1),
            (floor(p[1]) as i64).clamp(0, grid.height as i64 - 1),
        )
    };
    let (mut cx, mut cy) = cell(a);
    let end = cell(b);
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let sign = |d: f64| (d > 0.0) as i64 - (d < 0.0) as i64;
    let (sx, sy) = (sign(dx), sign(dy));
    let t_delta = |d: f64| if d == 0.0 { f64::INFINITY } else { 1.0 / d.abs() };
    let first = |pos: f64, c: i64, d: f64| {
        if d > 0.0 {
            (c as f64 + 1.0 - pos) / d
        } else if d < 0.0 {
            (pos - c as f64) / -d
        } else {
            f64::INFINITY
        }
    };
    let (tdx, tdy) = (t_delta(dx), t_delta(dy));
    let (mut tx, mut ty) = (first(a[0], cx, dx), first(a[1], cy, dy));

    let budget = (end.0 - cx).unsigned_abs() + (end.1 - cy).unsigned_abs() + 1;
    let mut out = Vec::with_capacity(budget as usize);
    for _ in 0..budget {
        out.push((cx as usize, cy as usize));
        if (cx, cy) == end {
            return (out, end_clipped);
        }
        if (tx - ty).abs() <= 1e-12 * tx.max(ty).max(1.0) {
            // Passing exactly through a corner: step diagonally.
            cx += sx;
            cy += sy;
            tx += tdx;
            ty += tdy;
        } else if tx < ty {
            cx += sx;
            tx += tdx;
        } else {
            cy += sy;
            ty += tdy;
        }
    }
    // Rounding drove the walk off the exact line; finish on the end cell.
    if out.last() != Some(&(end.0 as usize, end.1 as usize)) {
        out.push((end.0 as usize, end.1 as usize));
    }
    (out, end_clipped)
}

/// Cells crossed by the straight line from `from` to `to`, in order, each
/// once, ending with the cell that contains `to`. Points outside the grid
/// are clipped to its boundary.
pub fn ray_cells(grid: &OccupancyGrid, from: Point, to: Point) -> Vec<(usize, usize)> {
    traverse(grid, from, to).0
}

/// Integrates one scan taken at `pose` with the inverse sensor model:
/// every cell a beam crosses becomes more likely free and the cell where it
/// returns more likely occupied. Beams without a return clear space out to
/// `max_range`.
pub fn grid_update(grid: &mut OccupancyGrid, pose: &Pose2D, scan: &LidarScan, cfg: &GridConfig) {
    let from = [pose.x, pose.y];
    for (i, range) in scan.ranges.iter().enumerate() {
        let angle = pose.theta + scan.beam_angle(i);
        let reach = range.unwrap_or(scan.max_range);
        let to = [pose.x + reach * cos(angle), pose.y + reach * sin(angle)];
        let (cells, end_clipped) = traverse(grid, from, to);
        let hit = range.is_some() && !end_clipped;
        let free_upto = if hit { cells.len().saturating_sub(1) } else { cells.len() };
        for &(cx, cy) in &cells[..free_upto] {
            grid.add(cx, cy, cfg.l_free);
        }
        if hit {
            if let Some(&(cx, cy)) = cells.last() {
                grid.add(cx, cy, cfg.l_occ);
            }
        }
    }
}
