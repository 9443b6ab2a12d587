//! Procedural scenario worlds: open field, U-shaped bug trap, a tree line
//! with one gap, and random clutter.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{LrnError, Result};
use crate::geometry::Point2;
use crate::seeds::{rng_for, Purpose};
use crate::world::OccupancyWorld;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldKind {
    Open,
    BugTrap,
    TreelineGap,
    RandomClutter,
}

impl WorldKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(WorldKind::Open),
            "bug-trap" => Ok(WorldKind::BugTrap),
            "treeline-gap" => Ok(WorldKind::TreelineGap),
            "random-clutter" => Ok(WorldKind::RandomClutter),
            other => Err(LrnError::Config(format!("unknown world kind '{other}'"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WorldKind::Open => "open",
            WorldKind::BugTrap => "bug-trap",
            WorldKind::TreelineGap => "treeline-gap",
            WorldKind::RandomClutter => "random-clutter",
        }
    }
}

/// U-shaped wall. The opening faces `opening_dir_deg` (world frame); the
/// closed end is on the opposite side of `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct BugTrapParams {
    /// Center of the enclosed interior.
    pub center: Point2,
    /// Interior width across the opening.
    pub width_m: f64,
    /// Interior depth from the opening to the closed end.
    pub depth_m: f64,
    pub thickness_m: f64,
    pub opening_dir_deg: f64,
    /// Uniform seeded perturbation of center, width and depth.
    pub jitter_m: f64,
}

/// A wall of "trees" along `x = line_x_m` with one gap.
#[derive(Debug, Clone, PartialEq)]
pub struct TreelineParams {
    pub line_x_m: f64,
    pub thickness_m: f64,
    pub gap_width_m: f64,
    /// Lateral offset of the gap center from the world's mid-height.
    pub gap_offset_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClutterParams {
    pub obstacle_radius_m: f64,
    /// Minimum center spacing of the Poisson-disc samples.
    pub min_spacing_m: f64,
    pub max_obstacles: usize,
    /// Points kept clear of obstacles and required to stay connected.
    pub keep_clear: Vec<Point2>,
    pub clearance_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorldSpec {
    Open,
    BugTrap(BugTrapParams),
    TreelineGap(TreelineParams),
    RandomClutter(ClutterParams),
}

impl WorldSpec {
    pub fn kind(&self) -> WorldKind {
        match self {
            WorldSpec::Open => WorldKind::Open,
            WorldSpec::BugTrap(_) => WorldKind::BugTrap,
            WorldSpec::TreelineGap(_) => WorldKind::TreelineGap,
            WorldSpec::RandomClutter(_) => WorldKind::RandomClutter,
        }
    }

    /// Builds a spec from flat numeric parameters; missing keys take defaults
    /// scaled to the world size. `keep_clear` feeds random clutter.
    pub fn from_params(
        kind: WorldKind,
        size_m: f64,
        params: &BTreeMap<String, f64>,
        keep_clear: Vec<Point2>,
    ) -> Result<Self> {
        let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
        let known: &[&str] = match kind {
            WorldKind::Open => &[],
            WorldKind::BugTrap => {
                &["center_x", "center_y", "width_m", "depth_m", "thickness_m", "opening_dir_deg", "jitter_m"]
            }
            WorldKind::TreelineGap => &["line_x_m", "thickness_m", "gap_width_m", "gap_offset_m"],
            WorldKind::RandomClutter => &["obstacle_radius_m", "min_spacing_m", "max_obstacles", "clearance_m"],
        };
        if let Some(k) = params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(LrnError::Config(format!("unknown parameter '{k}' for {}", kind.as_str())));
        }
        Ok(match kind {
            WorldKind::Open => WorldSpec::Open,
            WorldKind::BugTrap => WorldSpec::BugTrap(BugTrapParams {
                center: Point2::new(get("center_x", size_m / 2.0), get("center_y", size_m / 2.0)),
                width_m: get("width_m", 30.0),
                depth_m: get("depth_m", 20.0),
                thickness_m: get("thickness_m", 1.0),
                opening_dir_deg: get("opening_dir_deg", 180.0),
                jitter_m: get("jitter_m", 0.0),
            }),
            WorldKind::TreelineGap => WorldSpec::TreelineGap(TreelineParams {
                line_x_m: get("line_x_m", size_m / 2.0),
                thickness_m: get("thickness_m", 2.0),
                gap_width_m: get("gap_width_m", 6.0),
                gap_offset_m: get("gap_offset_m", 0.0),
            }),
            WorldKind::RandomClutter => WorldSpec::RandomClutter(ClutterParams {
                obstacle_radius_m: get("obstacle_radius_m", 1.5),
                min_spacing_m: get("min_spacing_m", 8.0),
                max_obstacles: get("max_obstacles", 200.0) as usize,
                keep_clear,
                clearance_m: get("clearance_m", 3.0),
            }),
        })
    }
}

/// Square world of side `size_m` with its origin at (0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub size_m: f64,
    pub resolution: f64,
    pub spec: WorldSpec,
}

pub fn generate_world(cfg: &WorldConfig, seed: u64) -> Result<OccupancyWorld> {
    if !(cfg.size_m > 0.0) || !(cfg.resolution > 0.0) {
        return Err(LrnError::Unsatisfiable("size and resolution must be positive".into()));
    }
    let cells = (cfg.size_m / cfg.resolution).round() as usize;
    let mut world = OccupancyWorld::new(cells, cells, cfg.resolution, Point2::new(0.0, 0.0))?;
    match &cfg.spec {
        WorldSpec::Open => {}
        WorldSpec::BugTrap(p) => build_bug_trap(&mut world, cfg.size_m, p, seed)?,
        WorldSpec::TreelineGap(p) => build_treeline(&mut world, cfg.size_m, p)?,
        WorldSpec::RandomClutter(p) => return build_clutter(cfg, p, seed),
    }
    Ok(world)
}

/// Fills cells whose centers fall inside a rectangle rotated by `angle`
/// about `center`, with half extents along its local axes.
fn fill_oriented_rect(world: &mut OccupancyWorld, center: Point2, half_along: f64, half_across: f64, angle: f64) {
    let (s, c) = angle.sin_cos();
    let reach = half_along.hypot(half_across);
    let (x0, y0) = world.cell_of_unchecked(Point2::new(center.x - reach, center.y - reach));
    let (x1, y1) = world.cell_of_unchecked(Point2::new(center.x + reach, center.y + reach));
    for iy in y0..=y1 {
        for ix in x0..=x1 {
            let p = world.cell_center(ix, iy);
            let (dx, dy) = (p.x - center.x, p.y - center.y);
            let along = c * dx + s * dy;
            let across = -s * dx + c * dy;
            if along.abs() <= half_along && across.abs() <= half_across {
                world.set_lethal(ix, iy, true);
            }
        }
    }
}

fn build_bug_trap(world: &mut OccupancyWorld, size_m: f64, p: &BugTrapParams, seed: u64) -> Result<()> {
    let mut rng = rng_for(seed, 0, Purpose::World);
    let mut j = || if p.jitter_m > 0.0 { rng.gen_range(-p.jitter_m..=p.jitter_m) } else { 0.0 };
    let center = Point2::new(p.center.x + j(), p.center.y + j());
    let width = p.width_m + j();
    let depth = p.depth_m + j();
    let t = p.thickness_m;
    if !(width > 0.0 && depth > 0.0 && t > 0.0) {
        return Err(LrnError::Unsatisfiable("trap dimensions must be positive".into()));
    }
    let reach = (width / 2.0 + t).hypot(depth / 2.0 + t);
    if center.x - reach < 0.0 || center.y - reach < 0.0 || center.x + reach > size_m || center.y + reach > size_m {
        return Err(LrnError::Unsatisfiable(format!("bug trap of reach {reach:.1} m does not fit the world")));
    }
    // Local frame: +along points out of the opening.
    let a = p.opening_dir_deg.to_radians();
    let (s, c) = a.sin_cos();
    let at =
        |along: f64, across: f64| Point2::new(center.x + c * along - s * across, center.y + s * along + c * across);
    // Closed end.
    fill_oriented_rect(world, at(-depth / 2.0 - t / 2.0, 0.0), t / 2.0, width / 2.0 + t, a);
    // Side walls.
    for side in [-1.0, 1.0] {
        fill_oriented_rect(world, at(0.0, side * (width / 2.0 + t / 2.0)), depth / 2.0 + t, t / 2.0, a);
    }
    Ok(())
}

fn build_treeline(world: &mut OccupancyWorld, size_m: f64, p: &TreelineParams) -> Result<()> {
    let gap_center = size_m / 2.0 + p.gap_offset_m;
    let lo = gap_center - p.gap_width_m / 2.0;
    let hi = gap_center + p.gap_width_m / 2.0;
    let res = world.resolution();
    if !(p.gap_width_m >= res) || lo <= res || hi >= size_m - res {
        return Err(LrnError::Unsatisfiable(format!(
            "gap [{lo:.1}, {hi:.1}] m must be at least one cell wide and lie inside the wall"
        )));
    }
    if p.line_x_m - p.thickness_m / 2.0 <= 0.0 || p.line_x_m + p.thickness_m / 2.0 >= size_m {
        return Err(LrnError::Unsatisfiable("tree line outside the world".into()));
    }
    let x0 = p.line_x_m - p.thickness_m / 2.0;
    let x1 = p.line_x_m + p.thickness_m / 2.0;
    world.fill_rect(Point2::new(x0, 0.0), Point2::new(x1, lo));
    world.fill_rect(Point2::new(x0, hi), Point2::new(x1, size_m));
    Ok(())
}

const CLUTTER_ATTEMPTS: u64 = 64;

fn build_clutter(cfg: &WorldConfig, p: &ClutterParams, seed: u64) -> Result<OccupancyWorld> {
    if !(p.obstacle_radius_m > 0.0 && p.min_spacing_m > 0.0) {
        return Err(LrnError::Unsatisfiable("clutter radius and spacing must be positive".into()));
    }
    let cells = (cfg.size_m / cfg.resolution).round() as usize;
    for attempt in 0..CLUTTER_ATTEMPTS {
        let mut rng = rng_for(seed, attempt, Purpose::World);
        let mut world = OccupancyWorld::new(cells, cells, cfg.resolution, Point2::new(0.0, 0.0))?;
        let mut centers: Vec<Point2> = Vec::new();
        // Dart throwing with a bounded number of rejections.
        let mut misses = 0;
        while centers.len() < p.max_obstacles && misses < 500 {
            let c = Point2::new(rng.gen_range(0.0..cfg.size_m), rng.gen_range(0.0..cfg.size_m));
            let spaced = centers.iter().all(|o| o.distance(c) >= p.min_spacing_m);
            let clear = p.keep_clear.iter().all(|k| k.distance(c) >= p.clearance_m + p.obstacle_radius_m);
            if spaced && clear {
                centers.push(c);
                misses = 0;
            } else {
                misses += 1;
            }
        }
        for c in &centers {
            world.fill_disk(*c, p.obstacle_radius_m);
        }
        if connected(&world, &p.keep_clear) {
            return Ok(world);
        }
    }
    Err(LrnError::Unsatisfiable(format!("no connected clutter layout in {CLUTTER_ATTEMPTS} attempts")))
}

fn connected(world: &OccupancyWorld, points: &[Point2]) -> bool {
    if points.is_empty() {
        return true;
    }
    let labels = world.free_components();
    let mut comp = None;
    for p in points {
        let Some((x, y)) = world.cell_of(*p) else { return false };
        let l = labels[world.index(x as usize, y as usize)];
        if l == u32::MAX || comp.is_some_and(|c| c != l) {
            return false;
        }
        comp = Some(l);
    }
    true
}

/// True when all points lie in free space in one connected component.
pub fn points_connected(world: &OccupancyWorld, points: &[Point2]) -> bool {
    connected(world, points)
}
