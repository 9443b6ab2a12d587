//! Horizon-limited local policy: robot-centered costmap with unknown space,
//! A* with a fixed unknown-space cost, and a carrot-point tracking controller.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::affordance::AngularBins;
use crate::error::{LrnError, Result};
use crate::geometry::{normalize_angle, BinLayout, Heading, Point2, Pose2};
use crate::goal_head::{select_heading, GoalHeadConfig, SelectedHeading};
use crate::world::{line_of_sight, step_cost_units, units_to_m, OccupancyWorld, COST_UNITS_PER_M, NEIGHBORS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostCell {
    Free,
    Lethal,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorModel {
    /// Every in-window cell is copied from ground truth.
    OmniscientWindow,
    /// A cell is known only if nothing lethal lies between it and the robot.
    RaycastOcclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowShape {
    /// Square of side `2 * horizon`.
    Square,
    /// Cells farther than `horizon` from the robot are unknown.
    Disk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalCostmap {
    horizon_h: f64,
    resolution: f64,
    center: Pose2,
    /// World coordinate of the lower-left corner of local cell (0, 0).
    origin: Point2,
    size: usize,
    cells: Vec<CostCell>,
}

impl LocalCostmap {
    /// Builds a costmap directly from cells (row-major, `size * size`).
    pub fn from_cells(
        resolution: f64,
        origin: Point2,
        size: usize,
        cells: Vec<CostCell>,
        center: Pose2,
    ) -> Result<Self> {
        if cells.len() != size * size {
            return Err(LrnError::DimensionMismatch {
                expected: format!("{} cells", size * size),
                actual: format!("{} cells", cells.len()),
            });
        }
        Ok(LocalCostmap { horizon_h: size as f64 * resolution / 2.0, resolution, center, origin, size, cells })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon_h
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn center(&self) -> Pose2 {
        self.center
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    pub fn cells(&self) -> &[CostCell] {
        &self.cells
    }

    pub fn get(&self, ix: i64, iy: i64) -> Option<CostCell> {
        if ix < 0 || iy < 0 || ix as usize >= self.size || iy as usize >= self.size {
            return None;
        }
        Some(self.cells[iy as usize * self.size + ix as usize])
    }

    pub fn cell_of(&self, p: Point2) -> Option<(i64, i64)> {
        let ix = ((p.x - self.origin.x) / self.resolution).floor() as i64;
        let iy = ((p.y - self.origin.y) / self.resolution).floor() as i64;
        self.get(ix, iy).map(|_| (ix, iy))
    }

    pub fn cell_center(&self, ix: i64, iy: i64) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.cell_of(p).is_some()
    }

    pub fn unknown_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == CostCell::Unknown).count()
    }

    fn is_lethal(&self, ix: i64, iy: i64) -> bool {
        matches!(self.get(ix, iy), None | Some(CostCell::Lethal))
    }

    /// A non-lethal cell that is unknown, on the window edge, or touches unknown space.
    pub fn is_frontier(&self, ix: i64, iy: i64) -> bool {
        match self.get(ix, iy) {
            None | Some(CostCell::Lethal) => false,
            Some(CostCell::Unknown) => true,
            Some(CostCell::Free) => {
                let last = self.size as i64 - 1;
                ix == 0
                    || iy == 0
                    || ix == last
                    || iy == last
                    || NEIGHBORS.iter().any(|(dx, dy)| self.get(ix + dx, iy + dy) == Some(CostCell::Unknown))
            }
        }
    }
}

pub fn extract_local_costmap(
    world: &OccupancyWorld,
    pose: &Pose2,
    horizon_h: f64,
    shape: WindowShape,
    sensor: SensorModel,
) -> Result<LocalCostmap> {
    let Some((rx, ry)) = world.cell_of(pose.position()) else {
        return Err(LrnError::PoseOutOfWorld { x: pose.x, y: pose.y });
    };
    if !(horizon_h > 0.0) {
        return Err(LrnError::InvalidParameter(format!("horizon {horizon_h} must be positive")));
    }
    let res = world.resolution();
    let size = ((2.0 * horizon_h / res).round() as usize).max(1);
    let (gx0, gy0) = (rx - (size / 2) as i64, ry - (size / 2) as i64);
    let mut cells = Vec::with_capacity(size * size);
    for j in 0..size as i64 {
        for i in 0..size as i64 {
            let (gx, gy) = (gx0 + i, gy0 + j);
            let outside_disk =
                shape == WindowShape::Disk && world.cell_center(gx, gy).distance(pose.position()) > horizon_h;
            let occluded = sensor == SensorModel::RaycastOcclusion && !line_of_sight(world, (rx, ry), (gx, gy));
            cells.push(if outside_disk || occluded {
                CostCell::Unknown
            } else if world.is_lethal(gx, gy) {
                CostCell::Lethal
            } else {
                CostCell::Free
            });
        }
    }
    let o = world.origin();
    Ok(LocalCostmap {
        horizon_h,
        resolution: res,
        center: *pose,
        origin: Point2::new(o.x + gx0 as f64 * res, o.y + gy0 as f64 * res),
        size,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanTarget {
    Goal,
    FrontierOfMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    /// Cell centers from the start cell to the final cell.
    pub path: Vec<Point2>,
    /// Objective value in meters: path cost, plus the unknown-cost-weighted
    /// straight-line remainder when the goal lies beyond the map.
    pub cost: f64,
    pub cost_units: u64,
    pub reached: PlanTarget,
}

/// A* over the costmap. Step cost is the step length times 1 (free),
/// `unknown_cost` (unknown) or infinity (lethal).
///
/// If the goal cell is inside the window and not lethal, the plan ends there.
/// Otherwise any frontier cell (see [`LocalCostmap::is_frontier`]) may end
/// the plan at an extra cost of `unknown_cost` times its straight-line
/// distance to the goal, which selects the frontier cell that best trades
/// path cost against remaining distance.
pub fn plan_path(costmap: &LocalCostmap, start: Point2, goal: Point2, unknown_cost: f64) -> Result<PlanResult> {
    if !(unknown_cost >= 1.0) || !unknown_cost.is_finite() {
        return Err(LrnError::InvalidParameter(format!("unknown_cost {unknown_cost} must be finite and >= 1")));
    }
    let Some((sx, sy)) = costmap.cell_of(start) else {
        return Err(LrnError::PlanningFailure("start outside the costmap".into()));
    };
    if costmap.get(sx, sy) != Some(CostCell::Free) {
        return Err(LrnError::PlanningFailure("start cell is not known free".into()));
    }
    let n = costmap.size;
    let res = costmap.resolution;
    let free = [step_cost_units(res, false, 1.0), step_cost_units(res, true, 1.0)];
    let unknown = [step_cost_units(res, false, unknown_cost), step_cost_units(res, true, unknown_cost)];

    let goal_cell = costmap.cell_of(goal).filter(|&(gx, gy)| costmap.get(gx, gy) != Some(CostCell::Lethal));
    let goal_idx = goal_cell.map(|(gx, gy)| gy as usize * n + gx as usize);

    let idx_of = |x: i64, y: i64| y as usize * n + x as usize;
    let heuristic = |x: i64, y: i64| -> u64 {
        match goal_cell {
            Some((gx, gy)) => {
                // Octile distance with free-step costs: consistent.
                let dx = (x - gx).unsigned_abs();
                let dy = (y - gy).unsigned_abs();
                let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
                lo * free[1] + (hi - lo) * free[0]
            }
            None => {
                // Straight-line lower bound with slack for per-step rounding.
                let d = costmap.cell_center(x, y).distance(goal);
                ((d * COST_UNITS_PER_M * (1.0 - 1e-5)).floor() as u64).saturating_sub(1)
            }
        }
    };
    let exit_cost = |x: i64, y: i64| -> u64 {
        (unknown_cost * costmap.cell_center(x, y).distance(goal) * COST_UNITS_PER_M).round() as u64
    };

    const EXIT: usize = usize::MAX;
    let mut g = vec![u64::MAX; n * n];
    let mut parent = vec![usize::MAX; n * n];
    let mut exit_best = (u64::MAX, usize::MAX);
    let s = idx_of(sx, sy);
    g[s] = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((heuristic(sx, sy), s)));

    while let Some(Reverse((f, i))) = heap.pop() {
        if i == EXIT {
            break;
        }
        let (x, y) = ((i % n) as i64, (i / n) as i64);
        let gi = g[i];
        if f > gi.saturating_add(heuristic(x, y)) {
            continue; // stale entry
        }
        if Some(i) == goal_idx {
            break;
        }
        if goal_idx.is_none() && costmap.is_frontier(x, y) {
            let total = gi + exit_cost(x, y);
            if total < exit_best.0 {
                exit_best = (total, i);
                heap.push(Reverse((total, EXIT)));
            }
        }
        for &(dx, dy) in &NEIGHBORS {
            let (nx, ny) = (x + dx, y + dy);
            let Some(cell) = costmap.get(nx, ny) else { continue };
            let diagonal = dx != 0 && dy != 0;
            if cell == CostCell::Lethal || (diagonal && (costmap.is_lethal(x + dx, y) || costmap.is_lethal(x, y + dy)))
            {
                continue;
            }
            let step = if cell == CostCell::Unknown { unknown[diagonal as usize] } else { free[diagonal as usize] };
            let ni = idx_of(nx, ny);
            let ng = gi + step;
            if ng < g[ni] {
                g[ni] = ng;
                parent[ni] = i;
                heap.push(Reverse((ng + heuristic(nx, ny), ni)));
            }
        }
    }

    let (end, cost_units, reached) = match goal_idx {
        Some(gi) if g[gi] != u64::MAX => (gi, g[gi], PlanTarget::Goal),
        Some(_) => return Err(LrnError::PlanningFailure("goal unreachable".into())),
        None if exit_best.1 != usize::MAX => (exit_best.1, exit_best.0, PlanTarget::FrontierOfMap),
        None => return Err(LrnError::PlanningFailure("no reachable frontier".into())),
    };
    let mut cells = vec![end];
    let mut cur = end;
    while cur != s {
        cur = parent[cur];
        cells.push(cur);
    }
    cells.reverse();
    Ok(PlanResult {
        path: cells.into_iter().map(|i| costmap.cell_center((i % n) as i64, (i / n) as i64)).collect(),
        cost: units_to_m(cost_units),
        cost_units,
        reached,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarrotParams {
    pub lookahead: f64,
    pub v_max: f64,
    pub k_omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCommand {
    pub v: f64,
    pub omega: f64,
}

/// Index of the carrot: first path point at least `lookahead` of arc length
/// from the pose, else the last point.
pub fn carrot_index(path: &[Point2], pose: &Pose2, lookahead: f64) -> usize {
    let mut s = 0.0;
    let mut prev = pose.position();
    for (i, p) in path.iter().enumerate() {
        s += prev.distance(*p);
        if s >= lookahead {
            return i;
        }
        prev = *p;
    }
    path.len().saturating_sub(1)
}

pub fn carrot_command(path: &[Point2], pose: &Pose2, params: &CarrotParams) -> Result<VelocityCommand> {
    if path.is_empty() {
        return Err(LrnError::EmptyInput("carrot path"));
    }
    let carrot = path[carrot_index(path, pose, params.lookahead)];
    if carrot == pose.position() {
        return Ok(VelocityCommand { v: 0.0, omega: 0.0 });
    }
    let err = normalize_angle(pose.position().bearing_to(carrot) - pose.yaw);
    Ok(VelocityCommand { v: params.v_max * err.cos().max(0.0), omega: params.k_omega * err })
}

/// The Goal Heuristic baseline: the goal head fed a uniform affordance vector.
pub fn goal_heuristic_heading(
    goal_heading: Heading,
    prev: Option<&SelectedHeading>,
    dist_to_goal: f64,
    cfg: &GoalHeadConfig,
    layout: BinLayout,
) -> SelectedHeading {
    select_heading(&AngularBins::uniform(layout), goal_heading, prev, dist_to_goal, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn open_world(w: usize, h: usize) -> OccupancyWorld {
        OccupancyWorld::new(w, h, 0.5, Point2::new(0.0, 0.0)).unwrap()
    }

    #[test]
    fn window_size_from_horizon() {
        let w = open_world(100, 100);
        let pose = Pose2::new(25.2, 25.2, 0.0);
        let cm = extract_local_costmap(&w, &pose, 16.0, WindowShape::Square, SensorModel::OmniscientWindow).unwrap();
        assert_eq!(cm.size(), 64);
        assert_eq!(cm.unknown_count(), 0);
        assert!(cm.contains(pose.position()));
    }

    #[test]
    fn disk_window_masks_corners() {
        let w = open_world(100, 100);
        let pose = Pose2::new(25.25, 25.25, 0.0);
        let cm = extract_local_costmap(&w, &pose, 8.0, WindowShape::Disk, SensorModel::OmniscientWindow).unwrap();
        assert_eq!(cm.get(0, 0), Some(CostCell::Unknown));
        assert_eq!(cm.get(16, 16), Some(CostCell::Free));
    }

    #[test]
    fn pose_outside_world_is_an_error() {
        let w = open_world(20, 20);
        let r = extract_local_costmap(
            &w,
            &Pose2::new(-3.0, 1.0, 0.0),
            4.0,
            WindowShape::Square,
            SensorModel::OmniscientWindow,
        );
        assert!(matches!(r, Err(LrnError::PoseOutOfWorld { .. })));
    }

    #[test]
    fn raycast_hides_cells_behind_wall() {
        let mut w = open_world(60, 60);
        for iy in 20..40 {
            w.set_lethal(35, iy, true);
        }
        let pose = Pose2::new(15.25, 15.25, 0.0); // cell (30, 30)
        let cm = extract_local_costmap(&w, &pose, 8.0, WindowShape::Square, SensorModel::RaycastOcclusion).unwrap();
        let behind = cm.cell_of(w.cell_center(40, 30)).unwrap();
        let wall = cm.cell_of(w.cell_center(35, 30)).unwrap();
        let front = cm.cell_of(w.cell_center(33, 30)).unwrap();
        assert_eq!(cm.get(behind.0, behind.1), Some(CostCell::Unknown));
        assert_eq!(cm.get(wall.0, wall.1), Some(CostCell::Lethal));
        assert_eq!(cm.get(front.0, front.1), Some(CostCell::Free));
    }

    #[test]
    fn open_map_plan_cost_is_octile() {
        let w = open_world(80, 80);
        let pose = Pose2::new(20.25, 20.25, 0.0);
        let cm = extract_local_costmap(&w, &pose, 8.0, WindowShape::Square, SensorModel::OmniscientWindow).unwrap();
        let goal = Point2::new(20.25 + 3.0, 20.25 + 5.0);
        let plan = plan_path(&cm, pose.position(), goal, 1.5).unwrap();
        assert_eq!(plan.reached, PlanTarget::Goal);
        let expected = step_cost_units(0.5, true, 1.0) * 6 + step_cost_units(0.5, false, 1.0) * 4;
        assert_eq!(plan.cost_units, expected);
        assert_eq!(plan.path.len(), 11);
    }

    #[test]
    fn far_goal_ends_at_window_edge_toward_goal() {
        let w = open_world(400, 100);
        let pose = Pose2::new(20.25, 25.25, 0.0);
        let cm = extract_local_costmap(&w, &pose, 8.0, WindowShape::Square, SensorModel::OmniscientWindow).unwrap();
        let plan = plan_path(&cm, pose.position(), Point2::new(120.25, 25.25), 1.5).unwrap();
        assert_eq!(plan.reached, PlanTarget::FrontierOfMap);
        let end = *plan.path.last().unwrap();
        let (ex, _) = cm.cell_of(end).unwrap();
        assert_eq!(ex as usize, cm.size() - 1);
        assert_abs_diff_eq!(end.y, 25.25, epsilon = 1e-9);
    }

    #[test]
    fn start_must_be_known_free() {
        let mut w = open_world(40, 40);
        w.set_lethal(20, 20, true);
        let pose = Pose2::new(10.25, 10.25, 0.0);
        let cm = extract_local_costmap(&w, &pose, 4.0, WindowShape::Square, SensorModel::OmniscientWindow).unwrap();
        assert!(plan_path(&cm, Point2::new(-50.0, 0.0), Point2::new(12.0, 12.0), 1.5).is_err());
        assert!(plan_path(&cm, pose.position(), Point2::new(12.0, 12.0), 0.5).is_err());
    }

    #[test]
    fn enclosed_start_fails() {
        let mut w = open_world(40, 40);
        for (dx, dy) in NEIGHBORS {
            w.set_lethal(20 + dx, 20 + dy, true);
        }
        let pose = Pose2::new(10.25, 10.25, 0.0);
        let cm = extract_local_costmap(&w, &pose, 4.0, WindowShape::Square, SensorModel::OmniscientWindow).unwrap();
        let r = plan_path(&cm, pose.position(), Point2::new(30.0, 30.0), 1.5);
        assert!(matches!(r, Err(LrnError::PlanningFailure(_))));
        let r = plan_path(&cm, pose.position(), Point2::new(12.25, 10.25), 1.5);
        assert!(matches!(r, Err(LrnError::PlanningFailure(_))));
    }

    #[test]
    fn carrot_examples() {
        let p = CarrotParams { lookahead: 3.0, v_max: 1.0, k_omega: 1.0 };
        let pose = Pose2::new(0.0, 0.0, 0.0);
        let ahead: Vec<Point2> = (1..=10).map(|i| Point2::new(i as f64 * 0.5, 0.0)).collect();
        let c = carrot_command(&ahead, &pose, &p).unwrap();
        assert_eq!((c.v, c.omega), (1.0, 0.0));

        let behind = vec![Point2::new(-4.0, 0.0)];
        let c = carrot_command(&behind, &pose, &p).unwrap();
        assert_eq!(c.v, 0.0);
        assert_abs_diff_eq!(c.omega.abs(), PI, epsilon = 1e-12);

        let diag = vec![Point2::new(3.0, 3.0)];
        let c = carrot_command(&diag, &pose, &p).unwrap();
        assert_abs_diff_eq!(c.v, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(c.omega, FRAC_PI_4, epsilon = 1e-12);

        assert!(carrot_command(&[], &pose, &p).is_err());
        assert_eq!(carrot_index(&ahead, &pose, 3.0), 5);
        assert_eq!(carrot_index(&ahead, &pose, 100.0), 9);
    }

    #[test]
    fn goal_heuristic_peaks_at_goal() {
        let l = BinLayout::new(72).unwrap();
        let cfg = GoalHeadConfig {
            sigma_g_deg: 90.0,
            sigma_p_deg: 110.0,
            near_reduce_dist: 30.0,
            direct_dist: 12.0,
            sigma_g_floor_deg: 10.0,
        };
        let goal = l.bin_center(17).unwrap();
        let s = goal_heuristic_heading(goal, None, 60.0, &cfg, l);
        assert_eq!(s.heading, goal);
        let again = goal_heuristic_heading(goal, Some(&s), 60.0, &cfg, l);
        assert_eq!(again.heading, goal);
    }
}
