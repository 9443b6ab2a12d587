//! Ground-truth occupancy grid and the grid primitives shared by the
//! planner, the sensor model and the shortest-path oracle.
//!
//! Cell `(ix, iy)` covers `[origin.x + ix*res, origin.x + (ix+1)*res)` and
//! likewise in `y`. Moves are 8-connected; a diagonal move is only allowed
//! when neither of the two orthogonal cells it squeezes between is lethal.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{LrnError, Result};
use crate::geometry::Point2;

/// Fixed-point cost units per meter. Integer costs keep planner and oracle
/// comparisons exact.
pub const COST_UNITS_PER_M: f64 = 1e6;

pub(crate) const NEIGHBORS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Integer cost of a grid step of length `res` (or `res * sqrt 2`) scaled by `factor`.
pub fn step_cost_units(res: f64, diagonal: bool, factor: f64) -> u64 {
    let len = if diagonal { res * std::f64::consts::SQRT_2 } else { res };
    (len * factor * COST_UNITS_PER_M).round() as u64
}

pub fn units_to_m(units: u64) -> f64 {
    units as f64 / COST_UNITS_PER_M
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupancyWorld {
    resolution_mm: u64,
    width: usize,
    height: usize,
    origin_mm: (i64, i64),
    lethal: Vec<bool>,
}

impl OccupancyWorld {
    /// All-free interior with a lethal one-cell border.
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point2) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(LrnError::InvalidParameter(format!("world {width}x{height} too small")));
        }
        if !(resolution >= 0.05) || !resolution.is_finite() {
            return Err(LrnError::InvalidParameter(format!("resolution {resolution} must be >= 0.05 m")));
        }
        let mut w = OccupancyWorld {
            resolution_mm: (resolution * 1000.0).round() as u64,
            width,
            height,
            origin_mm: ((origin.x * 1000.0).round() as i64, (origin.y * 1000.0).round() as i64),
            lethal: vec![false; width * height],
        };
        w.seal_border();
        Ok(w)
    }

    fn seal_border(&mut self) {
        for x in 0..self.width {
            self.lethal[x] = true;
            self.lethal[(self.height - 1) * self.width + x] = true;
        }
        for y in 0..self.height {
            self.lethal[y * self.width] = true;
            self.lethal[y * self.width + self.width - 1] = true;
        }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution_mm as f64 / 1000.0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> Point2 {
        Point2::new(self.origin_mm.0 as f64 / 1000.0, self.origin_mm.1 as f64 / 1000.0)
    }

    pub fn size_m(&self) -> (f64, f64) {
        (self.width as f64 * self.resolution(), self.height as f64 * self.resolution())
    }

    pub fn in_bounds(&self, ix: i64, iy: i64) -> bool {
        ix >= 0 && iy >= 0 && (ix as usize) < self.width && (iy as usize) < self.height
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    /// Out-of-bounds cells count as lethal.
    pub fn is_lethal(&self, ix: i64, iy: i64) -> bool {
        !self.in_bounds(ix, iy) || self.lethal[self.index(ix as usize, iy as usize)]
    }

    pub fn is_free(&self, ix: i64, iy: i64) -> bool {
        !self.is_lethal(ix, iy)
    }

    /// Marks a cell lethal; border cells stay lethal regardless.
    pub fn set_lethal(&mut self, ix: i64, iy: i64, lethal: bool) {
        if !self.in_bounds(ix, iy) {
            return;
        }
        let on_border = ix == 0 || iy == 0 || ix as usize == self.width - 1 || iy as usize == self.height - 1;
        let i = self.index(ix as usize, iy as usize);
        self.lethal[i] = lethal || on_border;
    }

    /// Marks every cell whose center lies in the axis-aligned rectangle.
    pub fn fill_rect(&mut self, min: Point2, max: Point2) {
        let res = self.resolution();
        let o = self.origin();
        let x0 = ((min.x - o.x) / res - 0.5).ceil().max(0.0) as i64;
        let y0 = ((min.y - o.y) / res - 0.5).ceil().max(0.0) as i64;
        let x1 = ((max.x - o.x) / res - 0.5).floor() as i64;
        let y1 = ((max.y - o.y) / res - 0.5).floor() as i64;
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                self.set_lethal(ix, iy, true);
            }
        }
    }

    /// Marks every cell whose center lies within `radius` of `c`.
    pub fn fill_disk(&mut self, c: Point2, radius: f64) {
        let (cx, cy) = self.cell_of_unchecked(c);
        let r = (radius / self.resolution()).ceil() as i64 + 1;
        for iy in cy - r..=cy + r {
            for ix in cx - r..=cx + r {
                if self.in_bounds(ix, iy) && self.cell_center(ix, iy).distance(c) <= radius {
                    self.set_lethal(ix, iy, true);
                }
            }
        }
    }

    pub fn cell_of_unchecked(&self, p: Point2) -> (i64, i64) {
        let o = self.origin();
        let res = self.resolution();
        (((p.x - o.x) / res).floor() as i64, ((p.y - o.y) / res).floor() as i64)
    }

    pub fn cell_of(&self, p: Point2) -> Option<(i64, i64)> {
        let c = self.cell_of_unchecked(p);
        self.in_bounds(c.0, c.1).then_some(c)
    }

    pub fn cell_center(&self, ix: i64, iy: i64) -> Point2 {
        let o = self.origin();
        let res = self.resolution();
        Point2::new(o.x + (ix as f64 + 0.5) * res, o.y + (iy as f64 + 0.5) * res)
    }

    pub fn is_free_point(&self, p: Point2) -> bool {
        self.cell_of(p).is_some_and(|(x, y)| self.is_free(x, y))
    }

    pub fn lethal_count(&self) -> usize {
        self.lethal.iter().filter(|l| **l).count()
    }

    /// Lethal cells that are not on the border.
    pub fn interior_lethal_count(&self) -> usize {
        let mut n = 0;
        for iy in 1..self.height - 1 {
            for ix in 1..self.width - 1 {
                n += self.lethal[self.index(ix, iy)] as usize;
            }
        }
        n
    }

    /// Free 8-connected neighbors without corner cutting.
    pub fn free_neighbors(&self, ix: i64, iy: i64) -> impl Iterator<Item = (i64, i64, bool)> + '_ {
        NEIGHBORS.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (ix + dx, iy + dy);
            if self.is_lethal(nx, ny) {
                return None;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal && (self.is_lethal(ix + dx, iy) || self.is_lethal(ix, iy + dy)) {
                return None;
            }
            Some((nx, ny, diagonal))
        })
    }

    /// Dijkstra over free cells with octile costs; returns the cell path
    /// (start first) and its cost in cost units.
    pub fn shortest_cell_path(&self, start: (i64, i64), goal: (i64, i64)) -> Result<(Vec<(i64, i64)>, u64)> {
        if self.is_lethal(start.0, start.1) || self.is_lethal(goal.0, goal.1) {
            return Err(LrnError::NoPath);
        }
        let res = self.resolution();
        let straight = step_cost_units(res, false, 1.0);
        let diag = step_cost_units(res, true, 1.0);
        let n = self.width * self.height;
        let mut dist = vec![u64::MAX; n];
        let mut parent = vec![usize::MAX; n];
        let si = self.index(start.0 as usize, start.1 as usize);
        let gi = self.index(goal.0 as usize, goal.1 as usize);
        dist[si] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0u64, si)));
        while let Some(Reverse((d, i))) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            if i == gi {
                break;
            }
            let (ix, iy) = ((i % self.width) as i64, (i / self.width) as i64);
            for (nx, ny, diagonal) in self.free_neighbors(ix, iy) {
                let ni = self.index(nx as usize, ny as usize);
                let nd = d + if diagonal { diag } else { straight };
                if nd < dist[ni] {
                    dist[ni] = nd;
                    parent[ni] = i;
                    heap.push(Reverse((nd, ni)));
                }
            }
        }
        if dist[gi] == u64::MAX {
            return Err(LrnError::NoPath);
        }
        let mut path = vec![goal];
        let mut cur = gi;
        while cur != si {
            cur = parent[cur];
            path.push(((cur % self.width) as i64, (cur / self.width) as i64));
        }
        path.reverse();
        Ok((path, dist[gi]))
    }

    /// Labels 8-connected free components (no corner cutting); lethal cells get `u32::MAX`.
    pub fn free_components(&self) -> Vec<u32> {
        label_components(self.width, self.height, |ix, iy| self.is_free(ix, iy), |ix, iy| self.free_neighbors(ix, iy))
    }
}

pub(crate) fn label_components<N, I>(
    width: usize,
    height: usize,
    passable: impl Fn(i64, i64) -> bool,
    neighbors: N,
) -> Vec<u32>
where
    N: Fn(i64, i64) -> I,
    I: Iterator<Item = (i64, i64, bool)>,
{
    let mut label = vec![u32::MAX; width * height];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for iy in 0..height as i64 {
        for ix in 0..width as i64 {
            let i = iy as usize * width + ix as usize;
            if label[i] != u32::MAX || !passable(ix, iy) {
                continue;
            }
            label[i] = next;
            stack.push((ix, iy));
            while let Some((x, y)) = stack.pop() {
                for (nx, ny, _) in neighbors(x, y) {
                    if !passable(nx, ny) {
                        continue;
                    }
                    let ni = ny as usize * width + nx as usize;
                    if label[ni] == u32::MAX {
                        label[ni] = next;
                        stack.push((nx, ny));
                    }
                }
            }
            next += 1;
        }
    }
    label
}

/// Walks the grid cells strictly between `from` and `to` that the segment
/// joining their centers passes through with positive length. Exact corner
/// crossings step diagonally. Returns `false` as soon as `visit` does.
pub fn walk_segment_cells(from: (i64, i64), to: (i64, i64), mut visit: impl FnMut(i64, i64) -> bool) -> bool {
    let dx = (to.0 - from.0).abs();
    let dy = (to.1 - from.1).abs();
    let sx = (to.0 - from.0).signum();
    let sy = (to.1 - from.1).signum();
    let (mut x, mut y) = from;
    let (mut kx, mut ky) = (1i64, 1i64);
    while (x, y) != to {
        // Crossing parameters (2k - 1) / (2d), compared without division.
        let step = if dx == 0 {
            (false, true)
        } else if dy == 0 {
            (true, false)
        } else {
            let tx = (2 * kx - 1) * dy;
            let ty = (2 * ky - 1) * dx;
            (tx <= ty, ty <= tx)
        };
        if step.0 {
            x += sx;
            kx += 1;
        }
        if step.1 {
            y += sy;
            ky += 1;
        }
        if (x, y) != to && !visit(x, y) {
            return false;
        }
    }
    true
}

/// Line of sight between two cells: no lethal cell strictly between them.
pub fn line_of_sight(world: &OccupancyWorld, from: (i64, i64), to: (i64, i64)) -> bool {
    walk_segment_cells(from, to, |x, y| world.is_free(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(w: usize, h: usize) -> OccupancyWorld {
        OccupancyWorld::new(w, h, 0.5, Point2::new(0.0, 0.0)).unwrap()
    }

    /// Positive-length intersection of the center-to-center segment with the
    /// open unit square of cell (cx, cy), via parametric clipping.
    fn crosses_interior(from: (i64, i64), to: (i64, i64), cx: i64, cy: i64) -> bool {
        let (x0, y0) = (from.0 as f64 + 0.5, from.1 as f64 + 0.5);
        let (dx, dy) = ((to.0 - from.0) as f64, (to.1 - from.1) as f64);
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        for (p, d, min, max) in [(x0, dx, cx as f64, cx as f64 + 1.0), (y0, dy, cy as f64, cy as f64 + 1.0)] {
            if d == 0.0 {
                if !(p > min && p < max) {
                    return false;
                }
            } else {
                let (a, b) = ((min - p) / d, (max - p) / d);
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            }
        }
        hi > lo
    }

    #[test]
    fn border_is_lethal() {
        let w = world(10, 8);
        assert!(w.is_lethal(0, 3));
        assert!(w.is_lethal(9, 3));
        assert!(w.is_lethal(4, 7));
        assert!(w.is_free(4, 4));
        assert!(w.is_lethal(-1, 4));
        assert_eq!(w.interior_lethal_count(), 0);
    }

    #[test]
    fn segment_walk_matches_exact_clipping() {
        let mut rng_state = 12345u64;
        let mut next = move || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng_state >> 33) % 21) as i64 - 10
        };
        for _ in 0..400 {
            let from = (next(), next());
            let to = (next(), next());
            let mut walked = Vec::new();
            walk_segment_cells(from, to, |x, y| {
                walked.push((x, y));
                true
            });
            let mut brute = Vec::new();
            for cy in -11..=11 {
                for cx in -11..=11 {
                    if (cx, cy) != from && (cx, cy) != to && crosses_interior(from, to, cx, cy) {
                        brute.push((cx, cy));
                    }
                }
            }
            walked.sort();
            brute.sort();
            assert_eq!(walked, brute, "segment {from:?} -> {to:?}");
        }
    }

    #[test]
    fn diagonal_corner_cut_is_blocked() {
        let mut w = world(6, 6);
        w.set_lethal(3, 2, true);
        w.set_lethal(2, 3, true);
        assert!(!w.free_neighbors(2, 2).any(|(x, y, _)| (x, y) == (3, 3)));
    }

    #[test]
    fn shortest_path_straight_line() {
        let w = world(80, 10);
        let (path, cost) = w.shortest_cell_path((5, 5), (65, 5)).unwrap();
        assert_eq!(units_to_m(cost), 30.0);
        assert_eq!(path.len(), 61);
    }

    #[test]
    fn sealed_goal_has_no_path() {
        let mut w = world(20, 20);
        for i in 8..=12 {
            w.set_lethal(i, 8, true);
            w.set_lethal(i, 12, true);
            w.set_lethal(8, i, true);
            w.set_lethal(12, i, true);
        }
        assert!(matches!(w.shortest_cell_path((2, 2), (10, 10)), Err(LrnError::NoPath)));
    }
}
