//! Run configuration: platform presets, TOML loading, and conversion into
//! the simulator's parameter set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::affordance::BackboneParams;
use crate::error::{LrnError, Result};
use crate::geometry::{BinLayout, CameraModel};
use crate::goal_head::GoalHeadConfig;
use crate::local_nav::{CarrotParams, SensorModel, WindowShape};
use crate::sim::episode::{OracleParams, SimConfig};
use crate::sim::intervention::InterventionParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Spot,
    Racer,
    Custom,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spot" => Ok(Profile::Spot),
            "racer" => Ok(Profile::Racer),
            "custom" => Ok(Profile::Custom),
            _ => Err(LrnError::Config(format!("unknown profile '{s}' (spot, racer, custom)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Square,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Omniscient,
    Raycast,
}

/// Every tunable of a run. Fields absent from a config file keep the value
/// of the selected profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub bin_width_deg: f64,
    pub h_thresh: f64,
    pub alpha: f64,
    pub sigma_g_deg: f64,
    pub sigma_p_deg: f64,
    /// 0 disables the near-goal narrowing of `sigma_g`.
    pub near_reduce_dist_m: f64,
    pub sigma_g_floor_deg: f64,
    pub direct_dist_m: f64,
    /// Half-width of the square costmap, or radius of the disk.
    pub horizon_h_m: f64,
    pub window: WindowKind,
    pub sensor: SensorKind,
    pub unknown_cost: f64,
    pub carrot_m: f64,
    pub v_max: f64,
    pub k_omega: f64,
    pub omega_max: f64,
    pub dt: f64,
    pub goal_tolerance_m: f64,
    pub max_steps: usize,
    pub target_margin_m: f64,
    /// Keep filtered bins and the previous heading anchored in the world as
    /// the robot turns.
    pub yaw_compensation: bool,
    pub intervention_window: usize,
    pub intervention_delta_m: f64,
    pub teleop_m: f64,
    pub oracle_range_m: f64,
    pub beyond_factor: f64,
    /// Oracle scores only frontier cells the robot can see.
    pub oracle_sighted: bool,
    pub noise_level: f64,
    pub seed: u64,
}

/// Partial overlay read from a file; see [`RunConfig::load`].
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Overlay {
    profile: Option<Profile>,
    bin_width_deg: Option<f64>,
    h_thresh: Option<f64>,
    alpha: Option<f64>,
    sigma_g_deg: Option<f64>,
    sigma_p_deg: Option<f64>,
    near_reduce_dist_m: Option<f64>,
    sigma_g_floor_deg: Option<f64>,
    direct_dist_m: Option<f64>,
    horizon_h_m: Option<f64>,
    window: Option<WindowKind>,
    sensor: Option<SensorKind>,
    unknown_cost: Option<f64>,
    carrot_m: Option<f64>,
    v_max: Option<f64>,
    k_omega: Option<f64>,
    omega_max: Option<f64>,
    dt: Option<f64>,
    goal_tolerance_m: Option<f64>,
    max_steps: Option<usize>,
    target_margin_m: Option<f64>,
    yaw_compensation: Option<bool>,
    intervention_window: Option<usize>,
    intervention_delta_m: Option<f64>,
    teleop_m: Option<f64>,
    oracle_range_m: Option<f64>,
    beyond_factor: Option<f64>,
    oracle_sighted: Option<bool>,
    noise_level: Option<f64>,
    seed: Option<u64>,
}

macro_rules! overlay {
    ($cfg:ident, $o:ident, $($f:ident),*) => {
        $(if let Some(v) = $o.$f { $cfg.$f = v; })*
    };
}

impl RunConfig {
    pub fn spot() -> Self {
        RunConfig {
            profile: Profile::Spot,
            bin_width_deg: 5.0,
            h_thresh: 0.7,
            alpha: 0.1,
            sigma_g_deg: 90.0,
            sigma_p_deg: 110.0,
            near_reduce_dist_m: 30.0,
            sigma_g_floor_deg: 10.0,
            direct_dist_m: 12.0,
            horizon_h_m: 8.0,
            window: WindowKind::Square,
            sensor: SensorKind::Omniscient,
            unknown_cost: 1.5,
            carrot_m: 3.0,
            v_max: 1.0,
            k_omega: 1.5,
            omega_max: 1.0,
            dt: 0.5,
            goal_tolerance_m: 1.0,
            max_steps: 1500,
            target_margin_m: 1.0,
            yaw_compensation: true,
            intervention_window: 150,
            intervention_delta_m: 0.5,
            teleop_m: 10.0,
            oracle_range_m: 20.0,
            beyond_factor: 2.0,
            oracle_sighted: true,
            noise_level: 0.5,
            seed: 0,
        }
    }

    pub fn racer() -> Self {
        RunConfig {
            profile: Profile::Racer,
            h_thresh: 0.15,
            sigma_g_deg: 70.0,
            sigma_p_deg: 100.0,
            near_reduce_dist_m: 0.0,
            direct_dist_m: 75.0,
            horizon_h_m: 50.0,
            window: WindowKind::Disk,
            v_max: 4.0,
            carrot_m: 6.0,
            oracle_range_m: 60.0,
            ..Self::spot()
        }
    }

    pub fn preset(p: Profile) -> Self {
        match p {
            Profile::Racer => Self::racer(),
            Profile::Spot => Self::spot(),
            Profile::Custom => RunConfig { profile: Profile::Custom, ..Self::spot() },
        }
    }

    /// Parses a TOML overlay. Its `profile` key (default: `base`) picks the
    /// preset the remaining keys are applied to.
    pub fn parse_overlay(text: &str, base: Profile) -> Result<Self> {
        let o: Overlay = toml::from_str(text).map_err(|e| LrnError::Config(e.to_string()))?;
        let mut c = Self::preset(o.profile.unwrap_or(base));
        overlay!(
            c,
            o,
            bin_width_deg,
            h_thresh,
            alpha,
            sigma_g_deg,
            sigma_p_deg,
            near_reduce_dist_m,
            sigma_g_floor_deg,
            direct_dist_m,
            horizon_h_m,
            window,
            sensor,
            unknown_cost,
            carrot_m,
            v_max,
            k_omega,
            omega_max,
            dt,
            goal_tolerance_m,
            max_steps,
            target_margin_m,
            yaw_compensation,
            intervention_window,
            intervention_delta_m,
            teleop_m,
            oracle_range_m,
            beyond_factor,
            oracle_sighted,
            noise_level,
            seed
        );
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path, base: Profile) -> Result<Self> {
        Self::parse_overlay(&std::fs::read_to_string(path)?, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn layout(&self) -> Result<BinLayout> {
        BinLayout::from_width_deg(self.bin_width_deg)
    }

    pub fn head(&self) -> GoalHeadConfig {
        GoalHeadConfig {
            sigma_g_deg: self.sigma_g_deg,
            sigma_p_deg: self.sigma_p_deg,
            near_reduce_dist: self.near_reduce_dist_m,
            direct_dist: self.direct_dist_m,
            sigma_g_floor_deg: self.sigma_g_floor_deg,
        }
    }

    pub fn oracle(&self) -> OracleParams {
        OracleParams { range_m: self.oracle_range_m, beyond_factor: self.beyond_factor, sighted: self.oracle_sighted }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout()?;
        self.head().validate()?;
        let bad = |what: &str| Err(LrnError::Config(format!("invalid {what}")));
        if !(0.0..=1.0).contains(&self.h_thresh) {
            return bad("h_thresh");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha");
        }
        if !(self.unknown_cost >= 1.0 && self.unknown_cost.is_finite()) {
            return bad("unknown_cost");
        }
        let positive = [
            ("horizon_h_m", self.horizon_h_m),
            ("carrot_m", self.carrot_m),
            ("v_max", self.v_max),
            ("k_omega", self.k_omega),
            ("omega_max", self.omega_max),
            ("dt", self.dt),
            ("goal_tolerance_m", self.goal_tolerance_m),
            ("target_margin_m", self.target_margin_m),
            ("oracle_range_m", self.oracle_range_m),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return bad(name);
        }
        if !(self.beyond_factor > 1.0) {
            return bad("beyond_factor");
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return bad("noise_level");
        }
        if self.teleop_m < 0.0 || self.intervention_delta_m < 0.0 {
            return bad("intervention parameters");
        }
        Ok(())
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        self.validate()?;
        Ok(SimConfig {
            layout: self.layout()?,
            head: self.head(),
            backbone: BackboneParams { h_thresh: self.h_thresh, alpha: self.alpha },
            horizon_h: self.horizon_h_m,
            window: match self.window {
                WindowKind::Square => WindowShape::Square,
                WindowKind::Disk => WindowShape::Disk,
            },
            sensor: match self.sensor {
                SensorKind::Omniscient => SensorModel::OmniscientWindow,
                SensorKind::Raycast => SensorModel::RaycastOcclusion,
            },
            unknown_cost: self.unknown_cost,
            carrot: CarrotParams { lookahead: self.carrot_m, v_max: self.v_max, k_omega: self.k_omega },
            omega_max: self.omega_max,
            dt: self.dt,
            goal_tolerance: self.goal_tolerance_m,
            max_steps: self.max_steps,
            target_margin: self.target_margin_m,
            yaw_compensation: self.yaw_compensation,
            intervention: (self.intervention_window > 0).then_some(InterventionParams {
                window_t: self.intervention_window,
                min_progress: self.intervention_delta_m,
                teleop_dist: self.teleop_m,
            }),
        })
    }
}

/// One `[[camera]]` table of a camera file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraSpec {
    model: String,
    width: u32,
    height: u32,
    fx: Option<f64>,
    fy: Option<f64>,
    f: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
    #[serde(default)]
    mount_yaw_deg: f64,
    /// Fisheye image circle; defaults to 180 degrees.
    fov_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraFile {
    camera: Vec<CameraSpec>,
}

impl CameraSpec {
    fn build(&self) -> Result<CameraModel> {
        let bad = |m: &str| LrnError::Config(format!("camera: {m}"));
        if self.width == 0 || self.height == 0 {
            return Err(bad("width and height must be positive"));
        }
        let cx = self.cx.unwrap_or(self.width as f64 / 2.0);
        let cy = self.cy.unwrap_or(self.height as f64 / 2.0);
        let yaw = self.mount_yaw_deg.to_radians();
        let cam = match self.model.as_str() {
            "pinhole" => {
                let fx = self.fx.or(self.f).ok_or_else(|| bad("pinhole needs fx or f"))?;
                CameraModel::pinhole(self.width, self.height, fx, self.fy.unwrap_or(fx), cx, cy, yaw)
            }
            "fisheye" => {
                let f = self.f.or(self.fx).ok_or_else(|| bad("fisheye needs f"))?;
                CameraModel::fisheye(
                    self.width,
                    self.height,
                    f,
                    cx,
                    cy,
                    yaw,
                    self.fov_deg.unwrap_or(180.0).to_radians(),
                )
            }
            m => return Err(bad(&format!("unknown model '{m}' (pinhole, fisheye)"))),
        };
        if !(cam.fx > 0.0 && cam.fy > 0.0) {
            return Err(bad("focal lengths must be positive"));
        }
        Ok(cam)
    }
}

/// Parses a camera file: an array of `[[camera]]` tables with keys `model`,
/// `width`, `height`, `fx|f`, `fy`, `cx`, `cy`, `mount_yaw_deg`, `fov_deg`.
pub fn parse_cameras(text: &str) -> Result<Vec<CameraModel>> {
    let file: CameraFile = toml::from_str(text).map_err(|e| LrnError::Config(format!("camera file: {e}")))?;
    if file.camera.is_empty() {
        return Err(LrnError::Config("camera file lists no cameras".into()));
    }
    file.camera.iter().map(CameraSpec::build).collect()
}
