//! Heatmap-to-bins backbone: project each camera's heatmap onto angular
//! bins, scale per camera, threshold, max-merge across cameras, normalize,
//! and smooth over time with an exponential moving average.

use crate::error::{LrnError, Result};
use crate::geometry::{BinLayout, CameraModel};

/// Row-major scalar field over an image plane, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl Heatmap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(LrnError::DimensionMismatch {
                expected: format!("{} values", width as usize * height as usize),
                actual: format!("{} values", values.len()),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(LrnError::InvalidParameter(format!("heatmap value {bad} outside [0, 1]")));
        }
        Ok(Heatmap { width, height, values })
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Result<Self> {
        Heatmap::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, u: u32, v: u32) -> f32 {
        self.values[v as usize * self.width as usize + u as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, value: f32) {
        assert!((0.0..=1.0).contains(&value), "heatmap value {value} outside [0, 1]");
        let w = self.width as usize;
        self.values[v as usize * w + u as usize] = value;
    }
}

/// Score vector over the bins of a [`BinLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct AngularBins {
    layout: BinLayout,
    scores: Vec<f64>,
}

impl AngularBins {
    pub fn new(layout: BinLayout, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != layout.k() {
            return Err(LrnError::LayoutMismatch(layout.k(), scores.len()));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(LrnError::InvalidParameter(format!("bin score {bad} is negative or non-finite")));
        }
        Ok(AngularBins { layout, scores })
    }

    pub fn zeros(layout: BinLayout) -> Self {
        AngularBins { layout, scores: vec![0.0; layout.k()] }
    }

    pub fn uniform(layout: BinLayout) -> Self {
        let k = layout.k();
        AngularBins { layout, scores: vec![1.0 / k as f64; k] }
    }

    pub fn layout(&self) -> BinLayout {
        self.layout
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn sum(&self) -> f64 {
        self.scores.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.scores.iter().copied().fold(0.0, f64::max)
    }

    pub(crate) fn from_raw(layout: BinLayout, scores: Vec<f64>) -> Self {
        debug_assert_eq!(scores.len(), layout.k());
        AngularBins { layout, scores }
    }

    pub(crate) fn scores_mut(&mut self) -> &mut [f64] {
        &mut self.scores
    }

    fn check_layout(&self, other: &AngularBins) -> Result<()> {
        if self.layout != other.layout {
            return Err(LrnError::LayoutMismatch(self.layout.k(), other.layout.k()));
        }
        Ok(())
    }
}

/// Sums each valid pixel's heat into the bin of its heading.
pub fn project_heatmap(hm: &Heatmap, cam: &CameraModel, layout: BinLayout) -> Result<AngularBins> {
    if hm.width != cam.width || hm.height != cam.height {
        return Err(LrnError::DimensionMismatch {
            expected: format!("{}x{}", cam.width, cam.height),
            actual: format!("{}x{}", hm.width, hm.height),
        });
    }
    let mut scores = vec![0.0; layout.k()];
    for v in 0..hm.height {
        for u in 0..hm.width {
            let heat = hm.get(u, v);
            if heat == 0.0 {
                continue;
            }
            // Pixels outside a fisheye image circle carry no heading.
            if let Ok(h) = cam.heading_of_pixel(u as f64, v as f64) {
                scores[layout.bin_index(h)] += heat as f64;
            }
        }
    }
    Ok(AngularBins::from_raw(layout, scores))
}

/// Divides by the maximum score so the largest bin is exactly 1.
/// An all-zero vector is returned unchanged.
pub fn scale_to_max(b: &AngularBins) -> AngularBins {
    let m = b.max();
    if m == 0.0 {
        return b.clone();
    }
    AngularBins::from_raw(b.layout, b.scores.iter().map(|s| s / m).collect())
}

/// Zeroes every bin whose score is below `h_thresh`.
pub fn threshold_bins(b: &AngularBins, h_thresh: f64) -> Result<AngularBins> {
    if !(0.0..=1.0).contains(&h_thresh) {
        return Err(LrnError::InvalidParameter(format!("h_thresh {h_thresh} outside [0, 1]")));
    }
    Ok(AngularBins::from_raw(b.layout, b.scores.iter().map(|&s| if s < h_thresh { 0.0 } else { s }).collect()))
}

/// Elementwise maximum across cameras.
pub fn merge_bins(vectors: &[AngularBins]) -> Result<AngularBins> {
    let (first, rest) = vectors.split_first().ok_or(LrnError::EmptyInput("merge_bins"))?;
    let mut out = first.clone();
    for b in rest {
        out.check_layout(b)?;
        for (o, s) in out.scores.iter_mut().zip(&b.scores) {
            *o = o.max(*s);
        }
    }
    Ok(out)
}

/// Divides by the sum; an all-zero vector becomes uniform `1/k`.
pub fn normalize_bins(b: &AngularBins) -> AngularBins {
    let total = b.sum();
    if total == 0.0 {
        return AngularBins::uniform(b.layout);
    }
    AngularBins::from_raw(b.layout, b.scores.iter().map(|s| s / total).collect())
}

/// Exponential moving average over normalized bin vectors. The first
/// observation seeds the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    layout: BinLayout,
    filtered: Vec<f64>,
    initialized: bool,
}

impl EmaState {
    pub fn new(layout: BinLayout) -> Self {
        EmaState { layout, filtered: vec![0.0; layout.k()], initialized: false }
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn filtered(&self) -> &[f64] {
        &self.filtered
    }

    pub fn reset(&mut self) {
        self.filtered.iter_mut().for_each(|f| *f = 0.0);
        self.initialized = false;
    }

    /// Re-expresses the filter after the robot turned by `shift` bins
    /// counter-clockwise: the content moves `shift` bins clockwise.
    pub fn rotate(&mut self, shift: i64) {
        let k = self.filtered.len() as i64;
        self.filtered.rotate_left(shift.rem_euclid(k) as usize);
    }

    /// Seeds the filter with an arbitrary vector (used to test contraction).
    pub fn seeded(layout: BinLayout, filtered: Vec<f64>) -> Result<Self> {
        if filtered.len() != layout.k() {
            return Err(LrnError::LayoutMismatch(layout.k(), filtered.len()));
        }
        Ok(EmaState { layout, filtered, initialized: true })
    }
}

pub fn ema_update(state: &mut EmaState, b_norm: &AngularBins, alpha: f64) -> Result<AngularBins> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(LrnError::InvalidParameter(format!("alpha {alpha} outside (0, 1]")));
    }
    if state.layout != b_norm.layout {
        return Err(LrnError::LayoutMismatch(state.layout.k(), b_norm.layout.k()));
    }
    if !state.initialized || alpha == 1.0 {
        state.filtered.copy_from_slice(&b_norm.scores);
        state.initialized = true;
    } else {
        // f + a(b - f) == a*b + (1-a)*f, and leaves f untouched when b == f.
        for (f, b) in state.filtered.iter_mut().zip(&b_norm.scores) {
            *f += alpha * (b - *f);
        }
    }
    Ok(AngularBins::from_raw(state.layout, state.filtered.clone()))
}

/// Backbone parameters shared by every affordance source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackboneParams {
    pub h_thresh: f64,
    pub alpha: f64,
}

/// Post-projection stage: per-camera max scaling, threshold, merge,
/// normalize, EMA.
pub fn filter_camera_bins(
    per_camera: &[AngularBins],
    params: BackboneParams,
    state: &mut EmaState,
) -> Result<AngularBins> {
    if per_camera.is_empty() {
        return Err(LrnError::EmptyInput("affordance backbone"));
    }
    let thresholded =
        per_camera.iter().map(|b| threshold_bins(&scale_to_max(b), params.h_thresh)).collect::<Result<Vec<_>>>()?;
    let merged = merge_bins(&thresholded)?;
    ema_update(state, &normalize_bins(&merged), params.alpha)
}

/// Full backbone from heatmaps: project each camera, then [`filter_camera_bins`].
pub fn affordance_backbone(
    inputs: &[(&Heatmap, &CameraModel)],
    layout: BinLayout,
    params: BackboneParams,
    state: &mut EmaState,
) -> Result<AngularBins> {
    if inputs.is_empty() {
        return Err(LrnError::EmptyInput("affordance backbone"));
    }
    let projected = inputs.iter().map(|(hm, cam)| project_heatmap(hm, cam, layout)).collect::<Result<Vec<_>>>()?;
    filter_camera_bins(&projected, params, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn layout(k: usize) -> BinLayout {
        BinLayout::new(k).unwrap()
    }

    fn bins(scores: &[f64]) -> AngularBins {
        AngularBins::new(layout(scores.len()), scores.to_vec()).unwrap()
    }

    fn cam(w: u32, h: u32, yaw: f64) -> CameraModel {
        CameraModel::pinhole(w, h, 60.0, 60.0, w as f64 / 2.0, h as f64 / 2.0, yaw)
    }

    #[test]
    fn rotate_follows_a_left_turn() {
        let mut st = EmaState::seeded(layout(8), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        // Peak at bin 2; after turning left by one bin it sits at bin 1.
        st.rotate(1);
        assert_eq!(st.filtered()[1], 1.0);
        st.rotate(-3);
        assert_eq!(st.filtered()[4], 1.0);
        st.rotate(16);
        assert_eq!(st.filtered()[4], 1.0);
    }

    /// Brute-force per-bin pixel count: independent of project_heatmap.
    fn column_counts(c: &CameraModel, l: BinLayout) -> Vec<f64> {
        let mut counts = vec![0.0; l.k()];
        let w = l.bin_width();
        for u in 0..c.width {
            let az = c.mount_yaw - ((u as f64 - c.cx) / c.fx).atan();
            // Explicit interval search over bin edges.
            let a = crate::geometry::normalize_angle(az);
            let idx = (0..l.k())
                .find(|&i| {
                    let center = 2.0 * PI * i as f64 / l.k() as f64;
                    let d = crate::geometry::normalize_angle(a - center);
                    d >= -w / 2.0 && d < w / 2.0
                })
                .unwrap();
            counts[idx] += c.height as f64;
        }
        counts
    }

    #[test]
    fn heatmap_rejects_out_of_range() {
        assert!(Heatmap::new(2, 1, vec![0.0, 1.5]).is_err());
        assert!(Heatmap::new(2, 1, vec![0.0]).is_err());
    }

    #[test]
    fn zero_heatmap_projects_to_zero() {
        let c = cam(100, 10, 0.0);
        let b = project_heatmap(&Heatmap::filled(100, 10, 0.0).unwrap(), &c, layout(72)).unwrap();
        assert!(b.scores().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn single_pixel_lands_in_forward_bin() {
        let c = cam(100, 10, 0.0);
        let mut hm = Heatmap::filled(100, 10, 0.0).unwrap();
        hm.set(50, 3, 1.0);
        let b = project_heatmap(&hm, &c, layout(72)).unwrap();
        assert_eq!(b.scores()[0], 1.0);
        assert_eq!(b.sum(), 1.0);
    }

    #[test]
    fn uniform_heatmap_mass_matches_column_counts() {
        let c = cam(100, 10, 0.0);
        let l = layout(72);
        let b = project_heatmap(&Heatmap::filled(100, 10, 1.0).unwrap(), &c, l).unwrap();
        assert_eq!(b.sum(), 1000.0);
        assert_eq!(b.scores(), column_counts(&c, l).as_slice());
    }

    #[test]
    fn dimension_mismatch() {
        let c = cam(100, 10, 0.0);
        let r = project_heatmap(&Heatmap::filled(10, 10, 0.0).unwrap(), &c, layout(72));
        assert!(matches!(r, Err(LrnError::DimensionMismatch { .. })));
    }

    #[test]
    fn threshold_examples() {
        let b = bins(&[0.2, 0.8, 1.0]);
        assert_eq!(threshold_bins(&b, 0.0).unwrap(), b);
        assert_eq!(threshold_bins(&b, 0.7).unwrap().scores(), &[0.0, 0.8, 1.0]);
        let s = scale_to_max(&bins(&[3.0, 1.0, 3.0, 2.0]));
        assert_eq!(threshold_bins(&s, 1.0).unwrap().scores(), &[1.0, 0.0, 1.0, 0.0]);
        assert!(threshold_bins(&b, 1.1).is_err());
        assert!(threshold_bins(&b, -0.1).is_err());
    }

    #[test]
    fn merge_examples() {
        let a = bins(&[1.0, 0.0, 0.0]);
        assert_eq!(merge_bins(std::slice::from_ref(&a)).unwrap(), a);
        let m = merge_bins(&[a, bins(&[0.0, 2.0, 0.0])]).unwrap();
        assert_eq!(m.scores(), &[1.0, 2.0, 0.0]);
        assert!(matches!(merge_bins(&[]), Err(LrnError::EmptyInput(_))));
        assert!(merge_bins(&[bins(&[1.0]), bins(&[1.0, 2.0])]).is_err());
    }

    #[test]
    fn disjoint_cameras_never_share_a_bin() {
        // 90 deg cameras front and rear on 5 deg bins.
        let l = layout(72);
        let fx = 50.0;
        let front = CameraModel::pinhole(100, 4, fx, fx, 50.0, 2.0, 0.0);
        let rear = CameraModel::pinhole(100, 4, fx, fx, 50.0, 2.0, PI);
        let hm = Heatmap::filled(100, 4, 1.0).unwrap();
        let bf = project_heatmap(&hm, &front, l).unwrap();
        let br = project_heatmap(&hm, &rear, l).unwrap();
        for (f, r) in bf.scores().iter().zip(br.scores()) {
            assert!(*f == 0.0 || *r == 0.0);
        }
        let m = merge_bins(&[bf.clone(), br.clone()]).unwrap();
        for i in 0..72 {
            assert_eq!(m.scores()[i], bf.scores()[i] + br.scores()[i]);
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_bins(&bins(&[2.0, 2.0, 0.0, 0.0])).scores(), &[0.5, 0.5, 0.0, 0.0]);
        assert_eq!(normalize_bins(&bins(&[0.0; 4])).scores(), &[0.25; 4]);
        let n = normalize_bins(&bins(&[1.0, 2.0, 3.0, 4.0]));
        for (a, e) in n.scores().iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn ema_examples() {
        let l = layout(2);
        let mut st = EmaState::new(l);
        let v = bins(&[0.3, 0.7]);
        assert_eq!(ema_update(&mut st, &v, 0.1).unwrap(), v);

        let mut st = EmaState::seeded(l, vec![1.0, 0.0]).unwrap();
        let out = ema_update(&mut st, &bins(&[0.0, 1.0]), 0.1).unwrap();
        assert_abs_diff_eq!(out.scores()[0], 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(out.scores()[1], 0.1, epsilon = 1e-15);

        assert!(ema_update(&mut st, &v, 0.0).is_err());
        assert!(ema_update(&mut st, &v, 1.5).is_err());
        assert!(ema_update(&mut st, &bins(&[1.0, 0.0, 0.0]), 0.5).is_err());
    }

    #[test]
    fn backbone_one_hot() {
        let l = layout(72);
        let c = cam(100, 10, 0.0);
        let mut hm = Heatmap::filled(100, 10, 0.0).unwrap();
        hm.set(50, 5, 0.6);
        let mut st = EmaState::new(l);
        let p = BackboneParams { h_thresh: 0.0, alpha: 1.0 };
        let out = affordance_backbone(&[(&hm, &c)], l, p, &mut st).unwrap();
        assert_eq!(out.scores()[0], 1.0);
        assert_eq!(out.sum(), 1.0);
    }

    #[test]
    fn backbone_two_cameras_mass_follows_pixel_counts() {
        let l = layout(72);
        let front = CameraModel::pinhole(100, 4, 50.0, 50.0, 50.0, 2.0, 0.0);
        let rear = CameraModel::pinhole(100, 4, 50.0, 50.0, 50.0, 2.0, PI);
        let hm = Heatmap::filled(100, 4, 1.0).unwrap();
        let mut st = EmaState::new(l);
        let p = BackboneParams { h_thresh: 0.0, alpha: 1.0 };
        let out = affordance_backbone(&[(&hm, &front), (&hm, &rear)], l, p, &mut st).unwrap();
        // Both cameras share the same max bin count, so scaling is common.
        let mut counts = column_counts(&front, l);
        for (c, r) in counts.iter_mut().zip(column_counts(&rear, l)) {
            *c += r;
        }
        let total: f64 = counts.iter().sum();
        for (o, c) in out.scores().iter().zip(&counts) {
            assert_abs_diff_eq!(*o, c / total, epsilon = 1e-12);
        }
    }

    #[test]
    fn backbone_all_below_threshold_is_uniform() {
        let l = layout(72);
        let c = cam(100, 10, 0.0);
        let hm = Heatmap::filled(100, 10, 0.0).unwrap();
        let mut st = EmaState::new(l);
        let p = BackboneParams { h_thresh: 0.7, alpha: 0.1 };
        let out = affordance_backbone(&[(&hm, &c)], l, p, &mut st).unwrap();
        assert_eq!(out, AngularBins::uniform(l));
        assert!(affordance_backbone(&[], l, p, &mut st).is_err());
    }

    proptest! {
        #[test]
        fn backbone_output_in_unit_interval(
            vals in proptest::collection::vec(0.0f32..=1.0, 40),
            h in 0.0f64..=1.0,
            alpha in 0.01f64..=1.0,
            steps in 1usize..5,
        ) {
            let l = layout(24);
            let c = CameraModel::pinhole(10, 4, 8.0, 8.0, 5.0, 2.0, 0.4);
            let hm = Heatmap::new(10, 4, vals).unwrap();
            let mut st = EmaState::new(l);
            let p = BackboneParams { h_thresh: h, alpha };
            let mut out = AngularBins::zeros(l);
            for _ in 0..steps {
                out = affordance_backbone(&[(&hm, &c)], l, p, &mut st).unwrap();
            }
            prop_assert!(out.scores().iter().all(|s| (0.0..=1.0).contains(s)));
            let mut fresh = EmaState::new(l);
            let once = affordance_backbone(&[(&hm, &c)], l, BackboneParams { h_thresh: h, alpha: 1.0 }, &mut fresh).unwrap();
            prop_assert!((once.sum() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn rotating_mount_shifts_bins(m in 0usize..72, fx in 20.0f64..80.0) {
            let l = layout(72);
            let w = l.bin_width();
            let hm = Heatmap::filled(64, 3, 0.5).unwrap();
            let base = CameraModel::pinhole(64, 3, fx, fx, 32.3, 1.0, 0.0);
            let mut rot = base.clone();
            rot.mount_yaw = m as f64 * w;
            let b0 = project_heatmap(&hm, &base, l).unwrap();
            let b1 = project_heatmap(&hm, &rot, l).unwrap();
            for i in 0..72 {
                prop_assert_eq!(b1.scores()[(i + m) % 72], b0.scores()[i]);
            }
        }

        #[test]
        fn ema_alpha_one_is_bypass(v in proptest::collection::vec(0.0f64..1.0, 8), s in proptest::collection::vec(0.0f64..1.0, 8)) {
            let l = layout(8);
            let mut st = EmaState::seeded(l, s).unwrap();
            let input = AngularBins::new(l, v).unwrap();
            prop_assert_eq!(ema_update(&mut st, &input, 1.0).unwrap(), input);
        }

        #[test]
        fn threshold_idempotent(v in proptest::collection::vec(0.0f64..1.0, 12), h in 0.0f64..=1.0) {
            let b = AngularBins::new(layout(12), v).unwrap();
            let once = threshold_bins(&b, h).unwrap();
            prop_assert_eq!(threshold_bins(&once, h).unwrap(), once);
        }
    }
}
