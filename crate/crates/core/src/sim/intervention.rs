//! Automated stand-in for a human operator: a no-progress detector and a
//! teleop move along the ground-truth shortest path.

use crate::error::{LrnError, Result};
use crate::geometry::{Point2, Pose2};
use crate::world::{units_to_m, OccupancyWorld};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterventionParams {
    pub window_t: usize,
    pub min_progress: f64,
    pub teleop_dist: f64,
}

impl Default for InterventionParams {
    fn default() -> Self {
        InterventionParams { window_t: 150, min_progress: 0.5, teleop_dist: 10.0 }
    }
}

/// True when the best distance-to-goal over the last `window_t` samples beats
/// the best earlier sample by less than `min_progress`. Needs at least one
/// sample before the window.
pub fn detect_intervention(history: &[f64], window_t: usize, min_progress: f64) -> bool {
    if window_t == 0 || history.len() <= window_t {
        return false;
    }
    let split = history.len() - window_t;
    let before = history[..split].iter().copied().fold(f64::INFINITY, f64::min);
    let within = history[split..].iter().copied().fold(f64::INFINITY, f64::min);
    before - within < min_progress
}

/// Result of a teleop move: the new pose and the polyline actually driven.
#[derive(Debug, Clone, PartialEq)]
pub struct Teleop {
    pub pose: Pose2,
    pub driven: Vec<Point2>,
}

/// Polyline from `from` through the shortest cell path to `goal`.
fn shortest_polyline(world: &OccupancyWorld, from: Point2, goal: Point2) -> Result<(Vec<Point2>, u64)> {
    let (Some(s), Some(g)) = (world.cell_of(from), world.cell_of(goal)) else {
        return Err(LrnError::NoPath);
    };
    let (cells, units) = world.shortest_cell_path(s, g)?;
    let mut pts = vec![from];
    pts.extend(cells.iter().skip(1).map(|&(x, y)| world.cell_center(x, y)));
    if cells.len() > 1 {
        // Finish on the goal itself rather than its cell center.
        *pts.last_mut().unwrap() = goal;
    } else {
        pts.push(goal);
    }
    pts.dedup();
    Ok((pts, units))
}

/// Advances `teleop_dist` along the ground-truth shortest path, facing the
/// segment being driven. Zero distance only turns the robot toward the goal.
pub fn apply_intervention(world: &OccupancyWorld, pose: &Pose2, goal: Point2, teleop_dist: f64) -> Result<Teleop> {
    let (pts, _) = shortest_polyline(world, pose.position(), goal)?;
    if teleop_dist <= 0.0 {
        let yaw = if pose.position() == goal { pose.yaw } else { pose.position().bearing_to(goal) };
        return Ok(Teleop { pose: Pose2::new(pose.x, pose.y, yaw), driven: vec![pose.position()] });
    }
    let mut left = teleop_dist;
    let mut driven = vec![pts[0]];
    let mut yaw = pose.yaw;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.distance(b);
        yaw = a.bearing_to(b);
        if len >= left {
            let t = left / len;
            let p = Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
            driven.push(p);
            return Ok(Teleop { pose: Pose2::new(p.x, p.y, yaw), driven });
        }
        left -= len;
        driven.push(b);
    }
    let end = *driven.last().unwrap();
    Ok(Teleop { pose: Pose2::new(end.x, end.y, yaw), driven })
}

/// Length of the 8-connected octile shortest path between the cells of
/// `start` and `goal`.
pub fn oracle_shortest_path(world: &OccupancyWorld, start: Point2, goal: Point2) -> Result<f64> {
    let (Some(s), Some(g)) = (world.cell_of(start), world.cell_of(goal)) else {
        return Err(LrnError::NoPath);
    };
    Ok(units_to_m(world.shortest_cell_path(s, g)?.1))
}
