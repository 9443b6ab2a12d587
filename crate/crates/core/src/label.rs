//! Automatic affordance labels from point tracks. A tracked ground point is
//! followed backward in time from the frame where it sits in front of the
//! camera; where it was last visible before occlusion becomes a positive
//! hotspot, the path leading to it and the image columns through it become
//! negatives, and the rest stays unlabeled.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;

use crate::affordance::Heatmap;
use crate::error::{LrnError, Result};
use crate::geometry::CameraModel;
use crate::sim::episode::EpisodeResult;
use crate::world::{line_of_sight, OccupancyWorld};

pub const TRACK_HEADER: [&str; 5] = ["track_id", "frame", "u", "v", "visible"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSample {
    pub frame: u32,
    pub u: f64,
    pub v: f64,
    pub visible: bool,
}

/// Samples are strictly increasing in `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointTrack {
    pub id: u64,
    pub samples: Vec<TrackSample>,
}

#[derive(Debug, Deserialize)]
struct Row {
    track_id: u64,
    frame: u32,
    u: f64,
    v: f64,
    visible: u8,
}

/// Parses `track_id,frame,u,v,visible` CSV. Rows of one track may be
/// interleaved with other tracks but must appear in increasing frame order.
pub fn parse_tracks(text: &str) -> Result<Vec<PointTrack>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| LrnError::Parse { line: 1, msg: e.to_string() })?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    if headers.iter().ne(TRACK_HEADER) {
        return Err(LrnError::Parse { line: 1, msg: format!("expected header {}", TRACK_HEADER.join(",")) });
    }
    let mut tracks: BTreeMap<u64, Vec<TrackSample>> = BTreeMap::new();
    let mut rec = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                return Err(LrnError::Parse { line, msg: e.to_string() });
            }
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let row: Row = rec.deserialize(Some(&headers)).map_err(|e| LrnError::Parse { line, msg: e.to_string() })?;
        if row.visible > 1 {
            return Err(LrnError::Parse { line, msg: format!("visible must be 0 or 1, got {}", row.visible) });
        }
        if !row.u.is_finite() || !row.v.is_finite() {
            return Err(LrnError::Parse { line, msg: "non-finite pixel coordinate".into() });
        }
        let samples = tracks.entry(row.track_id).or_default();
        if let Some(last) = samples.last() {
            if row.frame <= last.frame {
                return Err(LrnError::Validation(format!(
                    "line {line}: track {} frame {} does not follow frame {}",
                    row.track_id, row.frame, last.frame
                )));
            }
        }
        samples.push(TrackSample { frame: row.frame, u: row.u, v: row.v, visible: row.visible == 1 });
    }
    Ok(tracks.into_iter().map(|(id, samples)| PointTrack { id, samples }).collect())
}

pub fn tracks_csv(tracks: &[PointTrack]) -> String {
    let mut out = TRACK_HEADER.join(",");
    out.push('\n');
    for t in tracks {
        for s in &t.samples {
            let _ = writeln!(out, "{},{},{:.6},{:.6},{}", t.id, s.frame, s.u, s.v, u8::from(s.visible));
        }
    }
    out
}

/// Tracks whose position at their last frame lies in the bottom `band`
/// fraction of the image.
pub fn select_foreground_tracks(tracks: &[PointTrack], image_height: u32, band: f64) -> Result<Vec<&PointTrack>> {
    if !(band > 0.0 && band <= 1.0) {
        return Err(LrnError::InvalidParameter(format!("band {band} outside (0, 1]")));
    }
    let min_v = (1.0 - band) * image_height as f64;
    Ok(tracks.iter().filter(|t| t.samples.last().is_some_and(|s| s.v >= min_v)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hotspot {
    pub frame: u32,
    pub u: f64,
    pub v: f64,
}

/// Index of the first sample of the final visible run, or `None` when that
/// run starts the track (the point was never occluded before it).
fn final_run_start(track: &PointTrack) -> Option<usize> {
    let s = &track.samples;
    let last_visible = s.iter().rposition(|x| x.visible)?;
    let start = s[..last_visible].iter().rposition(|x| !x.visible).map(|i| i + 1)?;
    Some(start)
}

/// Position at the first frame of the track's final visible run, i.e. the
/// last place the point is seen before it disappears when played backward.
pub fn find_hotspot(track: &PointTrack) -> Option<Hotspot> {
    let i = final_run_start(track)?;
    let s = track.samples[i];
    Some(Hotspot { frame: s.frame, u: s.u, v: s.v })
}

/// Samples of the final visible run after the hotspot: the path leading to it.
pub fn path_to_hotspot(track: &PointTrack) -> Vec<TrackSample> {
    let Some(start) = final_run_start(track) else { return Vec::new() };
    track.samples[start + 1..].iter().take_while(|s| s.visible).copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum LabelClass {
    Negative = 0,
    Positive = 1,
    Unlabeled = 2,
}

impl LabelClass {
    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(LabelClass::Negative),
            1 => Ok(LabelClass::Positive),
            2 => Ok(LabelClass::Unlabeled),
            _ => Err(LrnError::Format(format!("mask byte {b} is not 0, 1 or 2"))),
        }
    }
}

/// Per-pixel class plus value; positives carry 1 or a blurred score in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelHeatmap {
    width: u32,
    height: u32,
    values: Vec<f32>,
    classes: Vec<LabelClass>,
}

impl LabelHeatmap {
    pub fn unlabeled(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        LabelHeatmap { width, height, values: vec![0.0; n], classes: vec![LabelClass::Unlabeled; n] }
    }

    /// Rebuilds a label from its value heatmap and mask bytes.
    pub fn from_parts(values: Heatmap, mask: &[u8]) -> Result<Self> {
        if mask.len() != values.values().len() {
            return Err(LrnError::DimensionMismatch {
                expected: format!("{} mask bytes", values.values().len()),
                actual: format!("{}", mask.len()),
            });
        }
        let classes = mask.iter().map(|&b| LabelClass::from_byte(b)).collect::<Result<_>>()?;
        Ok(LabelHeatmap { width: values.width(), height: values.height(), values: values.values().to_vec(), classes })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn idx(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    pub fn class(&self, u: u32, v: u32) -> LabelClass {
        self.classes[self.idx(u, v)]
    }

    pub fn value(&self, u: u32, v: u32) -> f32 {
        self.values[self.idx(u, v)]
    }

    pub fn classes(&self) -> &[LabelClass] {
        &self.classes
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_heatmap(&self) -> Heatmap {
        Heatmap::new(self.width, self.height, self.values.clone()).expect("label values lie in [0, 1]")
    }

    pub fn mask_bytes(&self) -> Vec<u8> {
        self.classes.iter().map(|&c| c as u8).collect()
    }

    fn set(&mut self, u: u32, v: u32, class: LabelClass, value: f32) {
        let i = self.idx(u, v);
        self.classes[i] = class;
        self.values[i] = value;
    }
}

/// Renders a label. Precedence: hotspot > negative > blurred positive >
/// unlabeled, so the result does not depend on input order. Blur is
/// `exp(-r^2 / (2 sigma^2))` out to `4 sigma`.
pub fn render_label(
    width: u32,
    height: u32,
    hotspots: &[(u32, u32)],
    trajectory: &[(u32, u32)],
    w_col: u32,
    blur_sigma: Option<f64>,
) -> Result<LabelHeatmap> {
    if let Some(&(u, v)) = hotspots.iter().chain(trajectory).find(|&&(u, v)| u >= width || v >= height) {
        return Err(LrnError::InvalidPixel { u: u as f64, v: v as f64 });
    }
    if let Some(s) = blur_sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(LrnError::InvalidParameter(format!("blur sigma {s} must be positive")));
        }
    }
    let mut out = LabelHeatmap::unlabeled(width, height);

    if let Some(sigma) = blur_sigma {
        let reach = (4.0 * sigma).ceil() as i64;
        for &(hu, hv) in hotspots {
            let (hu, hv) = (hu as i64, hv as i64);
            for v in (hv - reach).max(0)..=(hv + reach).min(height as i64 - 1) {
                for u in (hu - reach).max(0)..=(hu + reach).min(width as i64 - 1) {
                    let r2 = ((u - hu).pow(2) + (v - hv).pow(2)) as f64;
                    if r2 > (reach * reach) as f64 {
                        continue;
                    }
                    let val = (-r2 / (2.0 * sigma * sigma)).exp().clamp(0.0, 1.0) as f32;
                    let i = out.idx(u as u32, v as u32);
                    if out.classes[i] == LabelClass::Unlabeled || out.values[i] < val {
                        out.classes[i] = LabelClass::Positive;
                        out.values[i] = val;
                    }
                }
            }
        }
    }

    for &(u, v) in trajectory {
        out.set(u, v, LabelClass::Negative, 0.0);
    }
    for &(hu, _) in hotspots {
        let lo = hu.saturating_sub(w_col);
        let hi = (hu + w_col).min(width - 1);
        for u in lo..=hi {
            for v in 0..height {
                out.set(u, v, LabelClass::Negative, 0.0);
            }
        }
    }
    for &(u, v) in hotspots {
        out.set(u, v, LabelClass::Positive, 1.0);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelOptions {
    pub band: f64,
    pub w_col: u32,
    pub blur_sigma: Option<f64>,
}

impl Default for LabelOptions {
    fn default() -> Self {
        LabelOptions { band: 0.2, w_col: 5, blur_sigma: None }
    }
}

fn pixel(u: f64, v: f64) -> (u32, u32) {
    (u.max(0.0).floor() as u32, v.max(0.0).floor() as u32)
}

/// Selection, hotspot search and rendering for one set of tracks. Returns
/// the label and the hotspots used.
pub fn label_tracks(
    tracks: &[PointTrack],
    width: u32,
    height: u32,
    opts: &LabelOptions,
) -> Result<(LabelHeatmap, Vec<Hotspot>)> {
    let mut hotspots = Vec::new();
    let mut hot_px = Vec::new();
    let mut path_px = Vec::new();
    for t in select_foreground_tracks(tracks, height, opts.band)? {
        let Some(h) = find_hotspot(t) else { continue };
        hotspots.push(h);
        hot_px.push(pixel(h.u, h.v));
        path_px.extend(path_to_hotspot(t).iter().map(|s| pixel(s.u, s.v)));
    }
    let label = render_label(width, height, &hot_px, &path_px, opts.w_col, opts.blur_sigma)?;
    Ok((label, hotspots))
}

/// Splits tracks into windows of `segment_frames` frames starting every
/// `stride` frames. Tracks with no samples in a window are dropped from it.
pub fn segment_tracks(tracks: &[PointTrack], segment_frames: u32, stride: u32) -> Result<Vec<(u32, Vec<PointTrack>)>> {
    if segment_frames == 0 || stride == 0 {
        return Err(LrnError::InvalidParameter("segment and stride must be at least one frame".into()));
    }
    let Some(last) = tracks.iter().filter_map(|t| t.samples.last()).map(|s| s.frame).max() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    let mut start = 0u32;
    while start <= last {
        let end = start.saturating_add(segment_frames);
        let seg: Vec<PointTrack> = tracks
            .iter()
            .map(|t| PointTrack {
                id: t.id,
                samples: t.samples.iter().filter(|s| s.frame >= start && s.frame < end).copied().collect(),
            })
            .filter(|t| !t.samples.is_empty())
            .collect();
        if !seg.is_empty() {
            out.push((start, seg));
        }
        start = match start.checked_add(stride) {
            Some(s) => s,
            None => break,
        };
    }
    Ok(out)
}

/// Track of the walked path as seen by the camera at the episode's start
/// pose, mounted `camera_height_m` above flat ground. Frames run backward
/// in time (frame 0 is the last pose), matching reverse video processing.
/// Poses that do not project into the image are not sampled; a sample is
/// visible when the start position has line of sight to it.
pub fn synth_tracks_from_episode(
    result: &EpisodeResult,
    camera: &CameraModel,
    world: &OccupancyWorld,
    camera_height_m: f64,
) -> Result<Vec<PointTrack>> {
    let Some(first) = result.trajectory.first() else { return Ok(Vec::new()) };
    let start = first.pose;
    let origin = world.cell_of(start.position()).ok_or(LrnError::PoseOutOfWorld { x: start.x, y: start.y })?;
    let n = result.trajectory.len() - 1;
    let mut samples = Vec::new();
    for (k, p) in result.trajectory.iter().enumerate().rev() {
        let pos = p.pose.position();
        let Some((u, v)) = camera.project_ground_point(start.to_body(pos), camera_height_m) else { continue };
        let visible = world.cell_of(pos).is_some_and(|c| line_of_sight(world, origin, c));
        samples.push(TrackSample { frame: (n - k) as u32, u, v, visible });
    }
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    Ok(vec![PointTrack { id: 0, samples }])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn track(vis: &[bool]) -> PointTrack {
        PointTrack {
            id: 0,
            samples: vis
                .iter()
                .enumerate()
                .map(|(i, &visible)| TrackSample { frame: i as u32, u: 10.0 + i as f64, v: 20.0 + i as f64, visible })
                .collect(),
        }
    }

    #[test]
    fn parse_examples() {
        assert!(parse_tracks("").unwrap().is_empty());
        assert!(parse_tracks("track_id,frame,u,v,visible\n").unwrap().is_empty());
        let text = "track_id,frame,u,v,visible\n1,0,1,2,1\n2,0,3,4,0\n1,1,1,2,1\n2,1,3,4,1\n1,2,1,2,0\n2,2,3,4,1\n";
        let t = parse_tracks(text).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|t| t.samples.len() == 3));
        assert_eq!(t[1].samples[0], TrackSample { frame: 0, u: 3.0, v: 4.0, visible: false });
    }

    #[test]
    fn parse_errors() {
        let dup = "track_id,frame,u,v,visible\n1,0,1,2,1\n1,0,1,2,1\n";
        assert!(matches!(parse_tracks(dup), Err(LrnError::Validation(_))));
        let back = "track_id,frame,u,v,visible\n1,3,1,2,1\n1,1,1,2,1\n";
        assert!(matches!(parse_tracks(back), Err(LrnError::Validation(_))));
        let bad = "track_id,frame,u,v,visible\n1,0,1,2,1\n1,x,1,2,1\n";
        assert!(matches!(parse_tracks(bad), Err(LrnError::Parse { line: 3, .. })));
        let vis = "track_id,frame,u,v,visible\n1,0,1,2,7\n";
        assert!(matches!(parse_tracks(vis), Err(LrnError::Parse { line: 2, .. })));
        assert!(matches!(parse_tracks("a,b\n1,2\n"), Err(LrnError::Parse { line: 1, .. })));
    }

    #[test]
    fn csv_round_trip() {
        let t = vec![track(&[false, true, true]), PointTrack { id: 4, ..track(&[true]) }];
        assert_eq!(parse_tracks(&tracks_csv(&t)).unwrap(), t);
    }

    #[test]
    fn foreground_selection() {
        let at = |v: f64| PointTrack { id: 0, samples: vec![TrackSample { frame: 0, u: 0.0, v, visible: true }] };
        let ts = [at(95.0), at(50.0)];
        assert_eq!(select_foreground_tracks(&ts, 100, 1.0).unwrap().len(), 2);
        let sel = select_foreground_tracks(&ts, 100, 0.2).unwrap();
        assert_eq!(sel.len(), 1);
        assert_eq!(sel[0].samples[0].v, 95.0);
        assert!(select_foreground_tracks(&ts, 100, 0.0).is_err());
    }

    #[test]
    fn hotspot_examples() {
        assert_eq!(find_hotspot(&track(&[true, true, true])), None);
        let h = find_hotspot(&track(&[false, false, true, true])).unwrap();
        assert_eq!((h.frame, h.u, h.v), (2, 12.0, 22.0));
        assert_eq!(find_hotspot(&track(&[true, false, true, true])).unwrap().frame, 2);
        assert_eq!(find_hotspot(&track(&[false, false])), None);
        // Re-occlusion after the run truncates to that run.
        assert_eq!(find_hotspot(&track(&[false, true, true, false])).unwrap().frame, 1);
        assert_eq!(path_to_hotspot(&track(&[false, true, true, false])).len(), 1);
    }

    #[test]
    fn render_examples() {
        let empty = render_label(20, 20, &[], &[], 2, None).unwrap();
        assert!(empty.classes().iter().all(|&c| c == LabelClass::Unlabeled));

        let l = render_label(20, 20, &[(10, 10)], &[], 2, None).unwrap();
        for v in 0..20 {
            for u in 0..20 {
                let want = if (u, v) == (10, 10) {
                    LabelClass::Positive
                } else if (8..=12).contains(&u) {
                    LabelClass::Negative
                } else {
                    LabelClass::Unlabeled
                };
                assert_eq!(l.class(u, v), want, "pixel ({u}, {v})");
            }
        }
        assert_eq!(l.value(10, 10), 1.0);
        assert!(render_label(20, 20, &[(20, 0)], &[], 2, None).is_err());
        assert!(render_label(20, 20, &[], &[(0, 20)], 2, None).is_err());
    }

    #[test]
    fn blur_follows_gaussian() {
        let l = render_label(40, 40, &[(20, 20)], &[], 0, Some(2.0)).unwrap();
        assert_eq!(l.value(20, 20), 1.0);
        for (du, dv) in [(1i32, 0i32), (3, 0), (2, 2), (1, 4)] {
            let (u, v) = ((20 + du) as u32, (20 + dv) as u32);
            let r2 = (du * du + dv * dv) as f64;
            if du == 0 {
                continue;
            }
            assert_eq!(l.class(u, v), LabelClass::Positive);
            assert!((l.value(u, v) as f64 - (-r2 / 8.0).exp()).abs() < 1e-6);
        }
        // The zero-width column through the hotspot overrides blur.
        assert_eq!(l.class(20, 22), LabelClass::Negative);
        assert_eq!(l.class(35, 35), LabelClass::Unlabeled);
    }

    #[test]
    fn negatives_beat_blur_and_hotspots_beat_negatives() {
        let l = render_label(30, 30, &[(10, 10), (13, 12)], &[(11, 10), (13, 12)], 1, Some(3.0)).unwrap();
        assert_eq!(l.class(11, 10), LabelClass::Negative);
        assert_eq!(l.class(13, 12), LabelClass::Positive);
        assert_eq!(l.class(12, 0), LabelClass::Negative);
        assert_eq!(l.class(16, 12), LabelClass::Positive);
    }

    #[test]
    fn segments_cover_windows() {
        let t = vec![track(&[true; 10])];
        let segs = segment_tracks(&t, 4, 4).unwrap();
        assert_eq!(segs.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 4, 8]);
        assert_eq!(segs[2].1[0].samples.len(), 2);
        assert_eq!(segment_tracks(&t, 5, 2).unwrap().len(), 5);
        assert!(segment_tracks(&t, 0, 1).is_err());
    }

    proptest! {
        #[test]
        fn prepending_occlusion_keeps_an_existing_hotspot(vis in proptest::collection::vec(any::<bool>(), 1..20), pre in 1usize..5) {
            let t = track(&vis);
            prop_assume!(find_hotspot(&t).is_some());
            let mut longer = vec![false; pre];
            longer.extend(&vis);
            let shifted = find_hotspot(&track(&longer)).unwrap();
            let h = find_hotspot(&t).unwrap();
            prop_assert_eq!(shifted.frame, h.frame + pre as u32);
        }

        #[test]
        fn render_is_order_independent_and_exclusive(
            hot in proptest::collection::vec((0u32..24, 0u32..16), 0..5),
            path in proptest::collection::vec((0u32..24, 0u32..16), 0..12),
            blur in proptest::option::of(0.5f64..3.0),
            w in 0u32..3,
        ) {
            let a = render_label(24, 16, &hot, &path, w, blur).unwrap();
            let mut h2 = hot.clone();
            h2.reverse();
            let mut p2 = path.clone();
            p2.rotate_left(path.len() / 2);
            let b = render_label(24, 16, &h2, &p2, w, blur).unwrap();
            prop_assert_eq!(&a, &b);
            for (c, v) in a.classes().iter().zip(a.values()) {
                match c {
                    LabelClass::Positive => prop_assert!(*v > 0.0 && *v <= 1.0),
                    _ => prop_assert_eq!(*v, 0.0),
                }
            }
            for &(u, v) in &hot {
                prop_assert_eq!(a.class(u, v), LabelClass::Positive);
            }
        }
    }
}
