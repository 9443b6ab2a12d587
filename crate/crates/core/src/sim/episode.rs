//! The online control loop: affordances, goal head, local planner, carrot
//! controller and unicycle kinematics, with automated interventions.

use std::fmt::Write as _;

use rand_chacha::ChaCha8Rng;

use super::intervention::{apply_intervention, detect_intervention, InterventionParams};
use super::oracle::{degrade_bins, oracle_bins, sighted_oracle_bins};
use super::scenario::Scenario;
use crate::affordance::{affordance_backbone, filter_camera_bins, AngularBins, BackboneParams, EmaState, Heatmap};
use crate::error::{LrnError, Result};
use crate::geometry::{normalize_angle, BinLayout, CameraModel, Heading, Point2, Pose2};
use crate::goal_head::{goal_point_from_heading, select_heading, GoalHeadConfig, SelectedHeading, SelectionMode};
use crate::local_nav::{
    carrot_command, carrot_index, extract_local_costmap, goal_heuristic_heading, plan_path, CarrotParams, SensorModel,
    WindowShape,
};
use crate::seeds::{rng_for, Purpose};
use crate::world::{line_of_sight, walk_segment_cells, OccupancyWorld};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub layout: BinLayout,
    pub head: GoalHeadConfig,
    pub backbone: BackboneParams,
    pub horizon_h: f64,
    pub window: WindowShape,
    pub sensor: SensorModel,
    pub unknown_cost: f64,
    pub carrot: CarrotParams,
    pub omega_max: f64,
    pub dt: f64,
    pub goal_tolerance: f64,
    pub max_steps: usize,
    /// How far beyond the costmap edge the heading target is placed.
    pub target_margin: f64,
    /// Re-express filtered bins and the previous heading in the current
    /// body frame after each turn.
    pub yaw_compensation: bool,
    /// `None` disables interventions.
    pub intervention: Option<InterventionParams>,
}

impl SimConfig {
    /// Distance of the heading target: just outside the costmap in every direction.
    fn target_radius(&self) -> f64 {
        match self.window {
            WindowShape::Square => self.horizon_h * std::f64::consts::SQRT_2 + self.target_margin,
            WindowShape::Disk => self.horizon_h + self.target_margin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams {
    /// Sight range of the oracle, independent of the costmap horizon.
    pub range_m: f64,
    pub beyond_factor: f64,
    /// Only frontier cells in line of sight of the robot count.
    pub sighted: bool,
}

impl OracleParams {
    pub fn bins(&self, world: &OccupancyWorld, pose: &Pose2, layout: BinLayout) -> AngularBins {
        if self.sighted {
            sighted_oracle_bins(world, pose, layout, self.range_m, self.beyond_factor)
        } else {
            oracle_bins(world, pose, layout, self.range_m, self.beyond_factor)
        }
    }
}

/// Recorded heatmaps replayed step by step; the last frame repeats once
/// the recording runs out.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySource {
    pub cameras: Vec<CameraModel>,
    /// `frames[step][camera]`.
    pub frames: Vec<Vec<Heatmap>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provider {
    Oracle(OracleParams),
    Degraded { oracle: OracleParams, noise_level: f64, seed: u64 },
    Uniform,
    Replay(ReplaySource),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    GoalHeuristic,
    Lrn(Provider),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Timeout,
    PlanningFailure,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Timeout => "timeout",
            Outcome::PlanningFailure => "planning-failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    Start,
    /// A control step; carries the heading selected at the previous pose.
    Drive(Heading, SelectionMode),
    Teleop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub step: usize,
    /// Elapsed time in control periods, teleop included.
    pub time_steps: usize,
    pub pose: Pose2,
    pub dist_to_goal: f64,
    pub kind: StepKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub trajectory: Vec<TrajectoryPoint>,
    /// Per control step, without the combined score vector.
    pub selections: Vec<SelectedHeading>,
    /// Pose positions at which interventions fired.
    pub interventions: Vec<Point2>,
    pub outcome: Outcome,
    pub failure: Option<String>,
    pub distance_m: f64,
    pub time_steps: usize,
}

impl EpisodeResult {
    pub fn intervention_count(&self) -> usize {
        self.interventions.len()
    }

    pub fn final_pose(&self) -> Pose2 {
        self.trajectory.last().expect("trajectory has the start pose").pose
    }

    /// CSV: `step,t,x,y,yaw,dist_to_goal,selected_heading_deg,mode,intervention`.
    pub fn trajectory_csv(&self, dt: f64) -> String {
        let mut out = String::from("step,t,x,y,yaw,dist_to_goal,selected_heading_deg,mode,intervention\n");
        for p in &self.trajectory {
            let (heading, mode, iv) = match p.kind {
                StepKind::Start => (String::new(), "start", 0),
                StepKind::Drive(h, m) => (format!("{:.6}", h.degrees()), m.as_str(), 0),
                StepKind::Teleop => (String::new(), "teleop", 1),
            };
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
                p.step,
                p.time_steps as f64 * dt,
                p.pose.x,
                p.pose.y,
                p.pose.yaw,
                p.dist_to_goal,
                heading,
                mode,
                iv
            );
        }
        out
    }
}

/// Mutable per-episode affordance state.
struct ProviderState<'a> {
    provider: Option<&'a Provider>,
    ema: EmaState,
    noise: Option<ChaCha8Rng>,
}

impl<'a> ProviderState<'a> {
    fn new(policy: &'a Policy, layout: BinLayout) -> Self {
        let provider = match policy {
            Policy::GoalHeuristic => None,
            Policy::Lrn(p) => Some(p),
        };
        let noise = match provider {
            Some(Provider::Degraded { seed, .. }) => Some(rng_for(*seed, 0, Purpose::AffordanceNoise)),
            _ => None,
        };
        ProviderState { provider, ema: EmaState::new(layout), noise }
    }

    fn filtered(
        &mut self,
        world: &OccupancyWorld,
        pose: &Pose2,
        step: usize,
        cfg: &SimConfig,
    ) -> Result<Option<AngularBins>> {
        let Some(provider) = self.provider else { return Ok(None) };
        let b = match provider {
            Provider::Oracle(o) => o.bins(world, pose, cfg.layout),
            Provider::Degraded { oracle, noise_level, .. } => {
                let clean = oracle.bins(world, pose, cfg.layout);
                degrade_bins(&clean, *noise_level, self.noise.as_mut().expect("noise stream"))
            }
            Provider::Uniform => AngularBins::uniform(cfg.layout),
            Provider::Replay(r) => {
                let frame = r.frames.get(step).or(r.frames.last()).ok_or(LrnError::EmptyInput("replay frames"))?;
                let inputs: Vec<(&Heatmap, &CameraModel)> = frame.iter().zip(&r.cameras).collect();
                return affordance_backbone(&inputs, cfg.layout, cfg.backbone, &mut self.ema).map(Some);
            }
        };
        filter_camera_bins(&[b], cfg.backbone, &mut self.ema).map(Some)
    }
}

/// Straight move between adjacent cells that neither enters nor squeezes
/// past a lethal cell.
fn move_allowed(world: &OccupancyWorld, from: Point2, to: Point2) -> bool {
    let (Some(a), Some(b)) = (world.cell_of(from), world.cell_of(to)) else { return false };
    if !world.is_free(b.0, b.1) {
        return false;
    }
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    if dx != 0 && dy != 0 && (dx.abs() == 1 && dy.abs() == 1) {
        return world.is_free(a.0 + dx, a.1) && world.is_free(a.0, a.1 + dy);
    }
    walk_segment_cells(a, b, |x, y| world.is_free(x, y))
}

/// Recovery when the straight move would clip an obstacle: step toward the
/// next path point instead, as a legged base can, or stay put.
fn sidestep(world: &OccupancyWorld, from: Point2, path: &[Point2], max_step: f64) -> Point2 {
    let Some(next) = path.iter().find(|p| p.distance(from) > 1e-9) else { return from };
    let d = from.distance(*next);
    let t = (max_step / d).min(1.0);
    let to = Point2::new(from.x + t * (next.x - from.x), from.y + t * (next.y - from.y));
    if move_allowed(world, from, to) {
        to
    } else {
        from
    }
}

pub fn run_episode(scenario: &Scenario, policy: &Policy, cfg: &SimConfig) -> EpisodeResult {
    let world = &scenario.world;
    let goal = scenario.goal;
    let mut state = ProviderState::new(policy, cfg.layout);
    let mut pose = scenario.start;
    let mut prev: Option<SelectedHeading> = None;
    // Body yaw at which `prev` was chosen and the filter was last aligned.
    let mut prev_yaw = pose.yaw;
    let mut ema_yaw = pose.yaw;
    let mut history: Vec<f64> = Vec::new();
    let mut trajectory = vec![TrajectoryPoint {
        step: 0,
        time_steps: 0,
        pose,
        dist_to_goal: pose.position().distance(goal),
        kind: StepKind::Start,
    }];
    let mut selections = Vec::new();
    let mut interventions = Vec::new();
    let mut time_steps = 0usize;
    let mut failure = None;

    let outcome = 'run: {
        for step in 0..cfg.max_steps {
            let dist = pose.position().distance(goal);
            if dist <= cfg.goal_tolerance {
                break 'run Outcome::Success;
            }
            if cfg.yaw_compensation {
                align_to_body(&mut state.ema, &mut ema_yaw, &mut prev, &mut prev_yaw, pose.yaw, cfg.layout);
            }
            let step_result = control_step(world, goal, &pose, prev.as_ref(), step, cfg, &mut state);
            let (next, sel) = match step_result {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e.to_string());
                    break 'run Outcome::PlanningFailure;
                }
            };
            pose = next;
            time_steps += 1;
            let d = pose.position().distance(goal);
            trajectory.push(TrajectoryPoint {
                step: step + 1,
                time_steps,
                pose,
                dist_to_goal: d,
                kind: StepKind::Drive(sel.heading, sel.mode),
            });
            selections.push(SelectedHeading { combined: None, ..sel.clone() });
            prev = Some(sel);
            prev_yaw = trajectory[trajectory.len() - 2].pose.yaw;
            history.push(d);

            let Some(iv) = cfg.intervention else { continue };
            if !detect_intervention(&history, iv.window_t, iv.min_progress) {
                continue;
            }
            interventions.push(pose.position());
            match apply_intervention(world, &pose, goal, iv.teleop_dist) {
                Ok(t) => {
                    let per_step = cfg.carrot.v_max * cfg.dt;
                    let mut from = pose.position();
                    for p in t.driven.iter().skip(1) {
                        time_steps += (from.distance(*p) / per_step).ceil() as usize;
                        from = *p;
                        trajectory.push(TrajectoryPoint {
                            step: step + 1,
                            time_steps,
                            pose: Pose2::new(p.x, p.y, t.pose.yaw),
                            dist_to_goal: p.distance(goal),
                            kind: StepKind::Teleop,
                        });
                    }
                    if t.driven.len() == 1 {
                        trajectory.push(TrajectoryPoint {
                            step: step + 1,
                            time_steps,
                            pose: t.pose,
                            dist_to_goal: t.pose.position().distance(goal),
                            kind: StepKind::Teleop,
                        });
                    }
                    pose = t.pose;
                    state.ema.reset();
                    prev = None;
                    history.clear();
                }
                Err(e) => {
                    failure = Some(format!("intervention: {e}"));
                    break 'run Outcome::PlanningFailure;
                }
            }
        }
        if pose.position().distance(goal) <= cfg.goal_tolerance {
            Outcome::Success
        } else {
            Outcome::Timeout
        }
    };

    let distance_m = trajectory.windows(2).map(|w| w[0].pose.position().distance(w[1].pose.position())).sum();
    EpisodeResult { trajectory, selections, interventions, outcome, failure, distance_m, time_steps }
}

/// Turns the filter by whole bins and the previous heading exactly so both
/// keep pointing at the same world directions.
fn align_to_body(
    ema: &mut EmaState,
    ema_yaw: &mut f64,
    prev: &mut Option<SelectedHeading>,
    prev_yaw: &mut f64,
    yaw: f64,
    layout: BinLayout,
) {
    if ema.is_initialized() {
        let w = layout.bin_width();
        let shift = (normalize_angle(yaw - *ema_yaw) / w).round() as i64;
        ema.rotate(shift);
        *ema_yaw += shift as f64 * w;
    } else {
        *ema_yaw = yaw;
    }
    if let Some(p) = prev.as_mut() {
        p.heading = Heading::new(p.heading.radians() - normalize_angle(yaw - *prev_yaw));
        *prev_yaw = yaw;
    }
}

/// One pass of the loop body; returns the next pose and the selection used.
fn control_step(
    world: &OccupancyWorld,
    goal: Point2,
    pose: &Pose2,
    prev: Option<&SelectedHeading>,
    step: usize,
    cfg: &SimConfig,
    state: &mut ProviderState<'_>,
) -> Result<(Pose2, SelectedHeading)> {
    let dist = pose.position().distance(goal);
    let costmap = extract_local_costmap(world, pose, cfg.horizon_h, cfg.window, cfg.sensor)?;
    let goal_heading = pose.relative_heading(goal);
    let sel = match state.filtered(world, pose, step, cfg)? {
        Some(b) => select_heading(&b, goal_heading, prev, dist, &cfg.head),
        None => goal_heuristic_heading(goal_heading, prev, dist, &cfg.head, cfg.layout),
    };
    let target = if sel.mode == SelectionMode::DirectToGoal || costmap.contains(goal) {
        goal
    } else {
        goal_point_from_heading(pose, &sel, cfg.target_radius())
    };
    let plan = plan_path(&costmap, pose.position(), target, cfg.unknown_cost)?;

    // Pull the carrot back until the robot can see it.
    let robot_cell = world.cell_of(pose.position()).ok_or(LrnError::PoseOutOfWorld { x: pose.x, y: pose.y })?;
    let mut idx = carrot_index(&plan.path, pose, cfg.carrot.lookahead);
    while idx > 0 {
        let c = world.cell_of_unchecked(plan.path[idx]);
        if line_of_sight(world, robot_cell, c) {
            break;
        }
        idx -= 1;
    }
    let cmd = carrot_command(&plan.path[..=idx], pose, &cfg.carrot)?;
    let omega = cmd.omega.clamp(-cfg.omega_max, cfg.omega_max);
    let moved = Point2::new(pose.x + cmd.v * pose.yaw.cos() * cfg.dt, pose.y + cmd.v * pose.yaw.sin() * cfg.dt);
    let position = if move_allowed(world, pose.position(), moved) {
        moved
    } else {
        sidestep(world, pose.position(), &plan.path, cfg.carrot.v_max * cfg.dt)
    };
    Ok((Pose2::new(position.x, position.y, pose.yaw + omega * cfg.dt), sel))
}
