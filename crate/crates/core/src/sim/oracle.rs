//! Ground-truth affordance provider standing in for the learned heatmap model.
//!
//! A bin scores 1 when the frontier point at range `H` along its heading is
//! reachable inside the local window and, from there, the map continues to
//! distant space without re-entering the sensed disk around the robot.

use std::collections::VecDeque;

use rand::Rng;

use crate::affordance::{scale_to_max, AngularBins};
use crate::geometry::{BinLayout, Point2, Pose2};
use crate::world::{line_of_sight, OccupancyWorld};

/// Square window of half-width `n` cells around `(rx, ry)`, clipped to the world.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Window {
    pub(crate) fn around(world: &OccupancyWorld, rx: i64, ry: i64, n: i64) -> Self {
        Window {
            x0: (rx - n).max(0),
            y0: (ry - n).max(0),
            x1: (rx + n).min(world.width() as i64 - 1),
            y1: (ry + n).min(world.height() as i64 - 1),
        }
    }

    pub(crate) fn contains(&self, ix: i64, iy: i64) -> bool {
        ix >= self.x0 && ix <= self.x1 && iy >= self.y0 && iy <= self.y1
    }

    fn width(&self) -> usize {
        (self.x1 - self.x0 + 1) as usize
    }

    fn local(&self, ix: i64, iy: i64) -> usize {
        (iy - self.y0) as usize * self.width() + (ix - self.x0) as usize
    }
}

pub(crate) fn window_half_cells(world: &OccupancyWorld, horizon_h: f64) -> i64 {
    (horizon_h / world.resolution()).round() as i64
}

/// Squared distance from `p` to the center of a cell.
fn dist2(world: &OccupancyWorld, p: Point2, ix: i64, iy: i64) -> f64 {
    let c = world.cell_center(ix, iy);
    (c.x - p.x).powi(2) + (c.y - p.y).powi(2)
}

/// Free window cell whose center is nearest to `p`; ties go to the smaller
/// `(iy, ix)`. Chebyshev rings around `p`'s cell stop once no farther ring
/// can beat the best candidate.
pub(crate) fn nearest_free_in_window(
    world: &OccupancyWorld,
    win: &Window,
    p: Point2,
    accept: impl Fn(i64, i64) -> bool,
) -> Option<(i64, i64)> {
    let res = world.resolution();
    let (px, py) = world.cell_of_unchecked(p);
    let (cx, cy) = (px.clamp(win.x0, win.x1), py.clamp(win.y0, win.y1));
    let max_r = (win.x1 - win.x0).max(win.y1 - win.y0) + 1;
    let mut best: Option<(f64, i64, i64)> = None;
    for r in 0..=max_r {
        if let Some((d, _, _)) = best {
            // Centers in ring r are at least (r - 1/2) cells from p; clamping
            // only moves p farther away.
            let bound = (r as f64 - 0.5) * res;
            if bound > 0.0 && bound * bound > d {
                break;
            }
        }
        let mut consider = |ix: i64, iy: i64| {
            if !win.contains(ix, iy) || !world.is_free(ix, iy) || !accept(ix, iy) {
                return;
            }
            let d = dist2(world, p, ix, iy);
            let better = match best {
                None => true,
                Some((bd, bx, by)) => d < bd || (d == bd && (iy, ix) < (by, bx)),
            };
            if better {
                best = Some((d, ix, iy));
            }
        };
        if r == 0 {
            consider(cx, cy);
            continue;
        }
        for ix in cx - r..=cx + r {
            consider(ix, cy - r);
            consider(ix, cy + r);
        }
        for iy in cy - r + 1..=cy + r - 1 {
            consider(cx - r, iy);
            consider(cx + r, iy);
        }
    }
    best.map(|(_, x, y)| (x, y))
}

/// Cells reachable from `start` through free cells inside the window.
pub(crate) fn window_reach(world: &OccupancyWorld, win: &Window, start: (i64, i64)) -> Vec<bool> {
    let mut seen = vec![false; win.width() * (win.y1 - win.y0 + 1) as usize];
    if !win.contains(start.0, start.1) || !world.is_free(start.0, start.1) {
        return seen;
    }
    let mut queue = VecDeque::new();
    seen[win.local(start.0, start.1)] = true;
    queue.push_back(start);
    while let Some((x, y)) = queue.pop_front() {
        for (nx, ny, _) in world.free_neighbors(x, y) {
            if win.contains(nx, ny) {
                let li = win.local(nx, ny);
                if !seen[li] {
                    seen[li] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    seen
}

/// Cells of the continuation region: free, centered at least `inner` from `pos`.
pub(crate) fn in_continuation_region(world: &OccupancyWorld, pos: Point2, inner: f64, ix: i64, iy: i64) -> bool {
    world.is_free(ix, iy) && world.cell_center(ix, iy).distance(pos) >= inner
}

/// Continuation search with a per-cell memo. Region cells visited by one
/// search share its answer: they belong to the same component.
struct Continuation<'a> {
    world: &'a OccupancyWorld,
    pos: Point2,
    inner: f64,
    far: f64,
    /// 0 unknown, 1 escapes, 2 enclosed.
    memo: Vec<u8>,
    stamp: Vec<u32>,
    epoch: u32,
}

impl<'a> Continuation<'a> {
    fn new(world: &'a OccupancyWorld, pos: Point2, inner: f64, far: f64) -> Self {
        let n = world.width() * world.height();
        Continuation { world, pos, inner, far, memo: vec![0; n], stamp: vec![0; n], epoch: 0 }
    }

    fn idx(&self, ix: i64, iy: i64) -> usize {
        self.world.index(ix as usize, iy as usize)
    }

    fn in_region(&self, ix: i64, iy: i64) -> bool {
        in_continuation_region(self.world, self.pos, self.inner, ix, iy)
    }

    /// Whether continuing from `cell` reaches a cell at least `far` from
    /// the robot through region cells. `cell` itself need not be in the region.
    fn escapes(&mut self, cell: (i64, i64)) -> bool {
        if self.in_region(cell.0, cell.1) {
            return self.component_escapes(cell);
        }
        let world = self.world;
        world
            .free_neighbors(cell.0, cell.1)
            .any(|(nx, ny, _)| self.in_region(nx, ny) && self.component_escapes((nx, ny)))
    }

    /// BFS over the region component of `start`, stopping at the first far
    /// cell or memoized cell.
    fn component_escapes(&mut self, start: (i64, i64)) -> bool {
        let si = self.idx(start.0, start.1);
        if self.memo[si] != 0 {
            return self.memo[si] == 1;
        }
        self.epoch += 1;
        let epoch = self.epoch;
        let mut visited = Vec::new();
        let mut queue = VecDeque::from([start]);
        self.stamp[si] = epoch;
        let mut result = false;
        while let Some((x, y)) = queue.pop_front() {
            let i = self.idx(x, y);
            if self.memo[i] != 0 {
                result = self.memo[i] == 1;
                break;
            }
            visited.push(i);
            if self.world.cell_center(x, y).distance(self.pos) >= self.far {
                result = true;
                break;
            }
            for (nx, ny, _) in self.world.free_neighbors(x, y) {
                let ni = self.idx(nx, ny);
                if self.stamp[ni] != epoch && self.in_region(nx, ny) {
                    self.stamp[ni] = epoch;
                    queue.push_back((nx, ny));
                }
            }
        }
        let mark = if result { 1 } else { 2 };
        for i in visited {
            self.memo[i] = mark;
        }
        result
    }
}

/// Per-bin 0/1 affordability, then scaled so the maximum is 1.
///
/// `horizon_h` is the oracle's sight range. Continuation from a frontier
/// cell runs through free cells at least `horizon_h - res` from the robot
/// and succeeds on reaching one at least `beyond_factor * horizon_h` away.
pub fn oracle_bins(
    world: &OccupancyWorld,
    pose: &Pose2,
    layout: BinLayout,
    horizon_h: f64,
    beyond_factor: f64,
) -> AngularBins {
    score_bins(world, pose, layout, horizon_h, beyond_factor, false)
}

/// Like [`oracle_bins`], but each frontier point snaps to the nearest free
/// cell the robot can see, so headings blocked by a nearby wall do not score
/// through space hidden behind it.
pub fn sighted_oracle_bins(
    world: &OccupancyWorld,
    pose: &Pose2,
    layout: BinLayout,
    horizon_h: f64,
    beyond_factor: f64,
) -> AngularBins {
    score_bins(world, pose, layout, horizon_h, beyond_factor, true)
}

fn score_bins(
    world: &OccupancyWorld,
    pose: &Pose2,
    layout: BinLayout,
    horizon_h: f64,
    beyond_factor: f64,
    sighted: bool,
) -> AngularBins {
    let k = layout.k();
    let Some((rx, ry)) = world.cell_of(pose.position()) else {
        return AngularBins::zeros(layout);
    };
    if !world.is_free(rx, ry) {
        return AngularBins::zeros(layout);
    }
    let pos = pose.position();
    let res = world.resolution();
    let win = Window::around(world, rx, ry, window_half_cells(world, horizon_h));
    let reach = window_reach(world, &win, (rx, ry));
    // 0 unknown, 1 visible, 2 hidden; filled lazily.
    let seen = std::cell::RefCell::new(vec![0u8; reach.len()]);
    let visible = |ix: i64, iy: i64| {
        if !sighted {
            return true;
        }
        let li = win.local(ix, iy);
        let mut seen = seen.borrow_mut();
        if seen[li] == 0 {
            seen[li] = if line_of_sight(world, (rx, ry), (ix, iy)) { 1 } else { 2 };
        }
        seen[li] == 1
    };

    let mut cont = Continuation::new(world, pos, horizon_h - res, beyond_factor * horizon_h);
    let mut scores = vec![0.0; k];
    for (i, center) in layout.centers().enumerate() {
        let a = pose.yaw + center.radians();
        let f = Point2::new(pos.x + horizon_h * a.cos(), pos.y + horizon_h * a.sin());
        let Some(cell) = nearest_free_in_window(world, &win, f, visible) else { continue };
        if reach[win.local(cell.0, cell.1)] && cont.escapes(cell) {
            scores[i] = 1.0;
        }
    }
    scale_to_max(&AngularBins::from_raw(layout, scores))
}

/// Mixes the oracle with i.i.d. uniform noise per bin and rescales to max 1.
pub fn degrade_bins(oracle: &AngularBins, noise_level: f64, rng: &mut impl Rng) -> AngularBins {
    let n = noise_level.clamp(0.0, 1.0);
    let mut out = oracle.clone();
    for s in out.scores_mut() {
        let u: f64 = rng.gen();
        *s = (1.0 - n) * *s + n * u;
    }
    scale_to_max(&out)
}
