//! Scenario files: a generated world plus start pose and goal.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::worldgen::{generate_world, points_connected, WorldConfig, WorldKind, WorldSpec};
use crate::error::{LrnError, Result};
use crate::geometry::{Point2, Pose2};
use crate::world::OccupancyWorld;

/// On-disk form. `start` is `[x, y, yaw_deg]`, `goal` is `[x, y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub size_m: f64,
    pub resolution: f64,
    pub start: [f64; 3],
    pub goal: [f64; 2],
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub world: OccupancyWorld,
    pub start: Pose2,
    pub goal: Point2,
    pub source: ScenarioFile,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| LrnError::Format(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn start_pose(&self) -> Pose2 {
        Pose2::new(self.start[0], self.start[1], self.start[2].to_radians())
    }

    pub fn goal_point(&self) -> Point2 {
        Point2::new(self.goal[0], self.goal[1])
    }

    pub fn world_config(&self) -> Result<WorldConfig> {
        let kind = WorldKind::parse(&self.kind)?;
        let keep = vec![self.start_pose().position(), self.goal_point()];
        Ok(WorldConfig {
            size_m: self.size_m,
            resolution: self.resolution,
            spec: WorldSpec::from_params(kind, self.size_m, &self.params, keep)?,
        })
    }

    /// Generates the world and checks start and goal.
    pub fn build(&self) -> Result<Scenario> {
        let world = generate_world(&self.world_config()?, self.seed)?;
        let sc = Scenario {
            name: self.name.clone(),
            seed: self.seed,
            world,
            start: self.start_pose(),
            goal: self.goal_point(),
            source: self.clone(),
        };
        sc.validate()?;
        Ok(sc)
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let (s, g) = (self.start.position(), self.goal);
        if !self.world.is_free_point(s) {
            return Err(LrnError::Validation(format!("start ({:.2}, {:.2}) is not free", s.x, s.y)));
        }
        if !self.world.is_free_point(g) {
            return Err(LrnError::Validation(format!("goal ({:.2}, {:.2}) is not free", g.x, g.y)));
        }
        if !points_connected(&self.world, &[s, g]) {
            return Err(LrnError::Validation("start and goal are not connected".into()));
        }
        Ok(())
    }
}

/// The standard bug trap: 100 m square at 0.5 m. The robot starts inside a U,
/// facing its closed end, and the goal lies 60 m ahead beyond that end.
pub fn bug_trap_file(seed: u64) -> ScenarioFile {
    let params = [
        ("center_x", 24.0),
        ("center_y", 50.0),
        ("width_m", 8.0),
        ("depth_m", 20.0),
        ("thickness_m", 1.0),
        ("opening_dir_deg", 180.0),
        ("jitter_m", 1.0),
    ];
    ScenarioFile {
        name: format!("bug-trap-{seed}"),
        kind: "bug-trap".into(),
        seed,
        size_m: 100.0,
        resolution: 0.5,
        start: [30.0, 50.0, 0.0],
        goal: [90.0, 50.0],
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

pub fn open_file(seed: u64, start: [f64; 3], goal: [f64; 2]) -> ScenarioFile {
    ScenarioFile {
        name: format!("open-{seed}"),
        kind: "open".into(),
        seed,
        size_m: 100.0,
        resolution: 0.5,
        start,
        goal,
        params: BTreeMap::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_toml() {
        let f = bug_trap_file(7);
        assert_eq!(ScenarioFile::parse(&f.to_toml()).unwrap(), f);
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = "name='a'\nkind='open'\nseed=1\nsize_m=50.0\nresolution=0.5\nstart=[5.0,5.0,0.0]\ngoal=[40.0,40.0]\ncolour=3\n";
        assert!(ScenarioFile::parse(text).is_err());
    }

    #[test]
    fn bug_trap_suite_is_valid() {
        for seed in 0..10 {
            let sc = bug_trap_file(seed).build().unwrap();
            assert_eq!(sc.world.width(), 200);
            assert_eq!(sc.start.position().distance(sc.goal), 60.0);
            assert!(sc.world.interior_lethal_count() > 0);
        }
    }

    #[test]
    fn goal_inside_wall_is_rejected() {
        let mut f = bug_trap_file(1);
        f.params.insert("jitter_m".into(), 0.0);
        f.goal = [24.0 + 10.0 + 0.5, 50.0];
        assert!(matches!(f.build(), Err(LrnError::Validation(_))));
    }
}
