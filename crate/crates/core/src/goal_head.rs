//! Goal-conditioned head: weights the filtered affordance bins by a Gaussian
//! around the goal heading and a Gaussian around the previously selected
//! heading, then takes the argmax.

use crate::affordance::AngularBins;
use crate::error::{LrnError, Result};
use crate::geometry::{BinLayout, Heading, Point2, Pose2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalHeadConfig {
    pub sigma_g_deg: f64,
    pub sigma_p_deg: f64,
    /// Distance below which `sigma_g` shrinks linearly with distance; 0 disables.
    pub near_reduce_dist: f64,
    /// Distance at or below which the head steers straight at the goal.
    pub direct_dist: f64,
    pub sigma_g_floor_deg: f64,
}

impl GoalHeadConfig {
    pub fn validate(&self) -> Result<()> {
        let sigmas_ok = self.sigma_g_deg > 0.0 && self.sigma_p_deg > 0.0 && self.sigma_g_floor_deg > 0.0;
        if !sigmas_ok {
            return Err(LrnError::InvalidParameter("goal head sigmas must be positive".into()));
        }
        let reduce_ok = self.near_reduce_dist == 0.0 || self.direct_dist <= self.near_reduce_dist;
        if !(self.direct_dist >= 0.0 && self.near_reduce_dist >= 0.0 && reduce_ok) {
            return Err(LrnError::InvalidParameter(format!(
                "need 0 <= direct_dist ({}) <= near_reduce_dist ({}) unless the reduction is disabled",
                self.direct_dist, self.near_reduce_dist
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    Lrn,
    DirectToGoal,
}

impl SelectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMode::Lrn => "lrn",
            SelectionMode::DirectToGoal => "direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedHeading {
    pub heading: Heading,
    pub mode: SelectionMode,
    /// Combined score vector `b * g * p`; empty in direct mode.
    pub combined: Option<AngularBins>,
}

/// Unnormalized Gaussian over bin centers using wrap-aware distance in degrees.
pub fn gaussian_scores(layout: BinLayout, mu: Heading, sigma_deg: f64) -> AngularBins {
    let two_var = 2.0 * sigma_deg * sigma_deg;
    let scores = layout
        .centers()
        .map(|c| {
            let d = c.distance_to(mu).to_degrees();
            (-d * d / two_var).exp()
        })
        .collect();
    AngularBins::from_raw(layout, scores)
}

pub fn effective_sigma_g(dist_to_goal: f64, cfg: &GoalHeadConfig) -> f64 {
    if dist_to_goal >= cfg.near_reduce_dist {
        cfg.sigma_g_deg
    } else {
        (cfg.sigma_g_deg * dist_to_goal / cfg.near_reduce_dist).max(cfg.sigma_g_floor_deg)
    }
}

pub fn select_heading(
    b_filtered: &AngularBins,
    goal_heading: Heading,
    prev: Option<&SelectedHeading>,
    dist_to_goal: f64,
    cfg: &GoalHeadConfig,
) -> SelectedHeading {
    if dist_to_goal <= cfg.direct_dist {
        return SelectedHeading { heading: goal_heading, mode: SelectionMode::DirectToGoal, combined: None };
    }
    let layout = b_filtered.layout();
    let g = gaussian_scores(layout, goal_heading, effective_sigma_g(dist_to_goal, cfg));
    let p = prev.map(|p| gaussian_scores(layout, p.heading, cfg.sigma_p_deg));

    let v: Vec<f64> = match &p {
        Some(p) => b_filtered.scores().iter().zip(g.scores()).zip(p.scores()).map(|((b, g), p)| b * g * p).collect(),
        // Initial consistency vector is all ones.
        None => b_filtered.scores().iter().zip(g.scores()).map(|(b, g)| b * g).collect(),
    };

    let best = argmax_toward(&v, layout, goal_heading);
    SelectedHeading {
        heading: layout.center_unchecked(best),
        mode: SelectionMode::Lrn,
        combined: Some(AngularBins::from_raw(layout, v)),
    }
}

/// Argmax with ties broken toward `goal`, then toward the lower index.
fn argmax_toward(v: &[f64], layout: BinLayout, goal: Heading) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        } else if v[i] == v[best] {
            let di = layout.center_unchecked(i).distance_to(goal);
            let db = layout.center_unchecked(best).distance_to(goal);
            if di < db {
                best = i;
            }
        }
    }
    best
}

/// World-frame point `radius` meters out along the selected body-frame heading.
pub fn goal_point_from_heading(pose: &Pose2, sel: &SelectedHeading, radius: f64) -> Point2 {
    let a = pose.yaw + sel.heading.radians();
    Point2::new(pose.x + radius * a.cos(), pose.y + radius * a.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn spot() -> GoalHeadConfig {
        GoalHeadConfig {
            sigma_g_deg: 90.0,
            sigma_p_deg: 110.0,
            near_reduce_dist: 30.0,
            direct_dist: 12.0,
            sigma_g_floor_deg: 10.0,
        }
    }

    fn l72() -> BinLayout {
        BinLayout::new(72).unwrap()
    }

    #[test]
    fn gaussian_peak_and_symmetry() {
        let l = l72();
        let g = gaussian_scores(l, l.bin_center(10).unwrap(), 30.0);
        let s = g.scores();
        let best = (0..72).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(best, 10);
        for d in 1..30 {
            assert_abs_diff_eq!(s[(10 + d) % 72], s[(82 - d) % 72], epsilon = 1e-12);
        }
    }

    #[test]
    fn gaussian_flat_limit() {
        let g = gaussian_scores(l72(), Heading::new(0.3), 1e6);
        let max = g.max();
        let min = g.scores().iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max / min < 1.0 + 1e-6);
    }

    #[test]
    fn gaussian_opposite_bin_closed_form() {
        let g = gaussian_scores(l72(), Heading::new(0.0), 90.0);
        assert_abs_diff_eq!(g.scores()[36], (-2.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(g.scores()[36], 0.135_335_283_236_612_7, epsilon = 1e-12);
    }

    #[test]
    fn sigma_schedule() {
        let c = spot();
        assert_eq!(effective_sigma_g(50.0, &c), 90.0);
        assert_eq!(effective_sigma_g(15.0, &c), 45.0);
        assert_eq!(effective_sigma_g(0.0, &c), 10.0);
        assert_eq!(effective_sigma_g(30.0, &c), 90.0);
    }

    #[test]
    fn config_validation() {
        assert!(spot().validate().is_ok());
        let mut c = spot();
        c.direct_dist = 40.0;
        assert!(c.validate().is_err());
        c = spot();
        c.sigma_p_deg = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn uniform_bins_pick_goal_bin() {
        let l = l72();
        let goal = Heading::new(0.7);
        let s = select_heading(&AngularBins::uniform(l), goal, None, 50.0, &spot());
        assert_eq!(s.mode, SelectionMode::Lrn);
        assert_eq!(s.heading, l.bin_center(l.bin_index(goal)).unwrap());
    }

    #[test]
    fn one_hot_bins_win_regardless_of_goal() {
        let l = l72();
        let mut scores = vec![0.0; 72];
        scores[50] = 1.0;
        let b = AngularBins::new(l, scores).unwrap();
        let s = select_heading(&b, Heading::new(0.0), None, 100.0, &spot());
        assert_eq!(s.heading, l.bin_center(50).unwrap());
    }

    #[test]
    fn consistency_outweighs_small_affordance_edge() {
        let l = l72();
        let goal = Heading::new(0.0);
        let left = l.bin_index(Heading::new(FRAC_PI_2));
        let right = l.bin_index(Heading::new(-FRAC_PI_2));
        let mut scores = vec![0.0; 72];
        scores[right] = 0.5;
        scores[left] = 0.5001;
        let b = AngularBins::new(l, scores).unwrap();
        let prev = SelectedHeading { heading: l.bin_center(right).unwrap(), mode: SelectionMode::Lrn, combined: None };
        // p at +90 is exp(-180^2 / (2 * 110^2)) = exp(-1.338843).
        let p_far = (-(180.0f64 * 180.0) / (2.0 * 110.0 * 110.0)).exp();
        assert_abs_diff_eq!(p_far, 0.262_149, epsilon = 1e-6);
        let s = select_heading(&b, goal, Some(&prev), 100.0, &spot());
        assert_eq!(s.heading, l.bin_center(right).unwrap());
        let v = s.combined.unwrap();
        assert!(v.scores()[right] > v.scores()[left]);
    }

    #[test]
    fn direct_mode_boundary() {
        let l = l72();
        let goal = Heading::new(1.0);
        let b = AngularBins::uniform(l);
        let s = select_heading(&b, goal, None, 12.0, &spot());
        assert_eq!(s.mode, SelectionMode::DirectToGoal);
        assert_eq!(s.heading, goal);
        let s = select_heading(&b, goal, None, 12.000_001, &spot());
        assert_eq!(s.mode, SelectionMode::Lrn);
    }

    #[test]
    fn ties_break_toward_goal_then_lower_index() {
        let l = BinLayout::new(4).unwrap();
        let b = AngularBins::new(l, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        // Goal exactly behind: bins 1 (+90) and 3 (-90) tie on every factor.
        let s = select_heading(&b, Heading::new(PI), None, 100.0, &spot());
        assert_eq!(s.heading, l.bin_center(1).unwrap());
    }

    #[test]
    fn hysteresis_holds_selection() {
        let l = l72();
        let mut scores = vec![0.0; 72];
        scores[9] = 1.0;
        scores[63] = 1.0;
        let b = AngularBins::new(l, scores).unwrap();
        let mut prev = select_heading(&b, Heading::new(0.0), None, 100.0, &spot());
        let first = prev.heading;
        for _ in 0..20 {
            prev = select_heading(&b, Heading::new(0.0), Some(&prev), 100.0, &spot());
            assert_eq!(prev.heading, first);
        }
    }

    #[test]
    fn goal_points() {
        let sel = |h: f64| SelectedHeading { heading: Heading::new(h), mode: SelectionMode::Lrn, combined: None };
        let p = goal_point_from_heading(&Pose2::new(0.0, 0.0, 0.0), &sel(0.0), 9.0);
        assert_eq!((p.x, p.y), (9.0, 0.0));
        let p = goal_point_from_heading(&Pose2::new(10.0, 10.0, FRAC_PI_2), &sel(0.0), 9.0);
        assert_abs_diff_eq!(p.x, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 19.0, epsilon = 1e-12);
        let p = goal_point_from_heading(&Pose2::new(0.0, 0.0, 0.0), &sel(FRAC_PI_4), 8.0 * 2f64.sqrt());
        assert_abs_diff_eq!(p.x, 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn goal_heuristic_exhaustive_over_goal_bins() {
        let l = l72();
        let u = AngularBins::uniform(l);
        for j in 0..72 {
            let goal = l.bin_center(j).unwrap();
            let s = select_heading(&u, goal, None, 100.0, &spot());
            assert_eq!(s.heading, goal);
        }
    }

    proptest! {
        #[test]
        fn direct_mode_iff_within_direct_dist(d in 0.0f64..100.0) {
            let s = select_heading(&AngularBins::uniform(l72()), Heading::new(0.2), None, d, &spot());
            prop_assert_eq!(s.mode == SelectionMode::DirectToGoal, d <= 12.0);
        }
    }
}
