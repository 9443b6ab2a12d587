//! Plain SVG text for a world-and-path overlay and a line plot.

use std::fmt::Write as _;

use crate::geometry::Point2;
use crate::sim::episode::{EpisodeResult, StepKind};
use crate::world::OccupancyWorld;

/// World at one pixel per cell, `y` up. Lethal runs are merged per row.
/// Driven segments are blue, teleop segments orange; interventions are
/// red crosses.
pub fn episode_svg(world: &OccupancyWorld, result: &EpisodeResult, goal: Point2) -> String {
    let (w, h) = (world.width(), world.height());
    let res = world.resolution();
    let o = world.origin();
    let px = |p: Point2| ((p.x - o.x) / res, h as f64 - (p.y - o.y) / res);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
        w * 4,
        h * 4
    );
    for iy in 0..h {
        let mut ix = 0;
        while ix < w {
            if world.is_lethal(ix as i64, iy as i64) {
                let start = ix;
                while ix < w && world.is_lethal(ix as i64, iy as i64) {
                    ix += 1;
                }
                let _ = writeln!(
                    s,
                    "<rect x=\"{start}\" y=\"{}\" width=\"{}\" height=\"1\" fill=\"black\"/>",
                    h - 1 - iy,
                    ix - start
                );
            } else {
                ix += 1;
            }
        }
    }
    for pair in result.trajectory.windows(2) {
        let (a, b) = (px(pair[0].pose.position()), px(pair[1].pose.position()));
        let color = if matches!(pair[1].kind, StepKind::Teleop) { "orange" } else { "blue" };
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"0.5\"/>",
            a.0, a.1, b.0, b.1
        );
    }
    for p in &result.interventions {
        let (x, y) = px(*p);
        let _ = writeln!(
            s,
            "<path d=\"M{:.2} {:.2}l3 3m0 -3l-3 3\" stroke=\"red\" stroke-width=\"0.6\"/>",
            x - 1.5,
            y - 1.5
        );
    }
    if let Some(first) = result.trajectory.first() {
        let (x, y) = px(first.pose.position());
        let _ = writeln!(s, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.5\" fill=\"green\"/>");
    }
    let (gx, gy) = px(goal);
    let _ = writeln!(s, "<circle cx=\"{gx:.2}\" cy=\"{gy:.2}\" r=\"1.5\" fill=\"red\"/>");
    s.push_str("</svg>\n");
    s
}

/// Single-series line plot with markers and min/max axis labels.
pub fn line_plot_svg(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let (w, h, m) = (480.0, 320.0, 50.0);
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let (x0, x1) = bounds(finite.iter().map(|p| p.0));
    let (y0, y1) = bounds(finite.iter().map(|p| p.1));
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        b = h - m,
        r = w - m
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>",
        w / 2.0,
        h - 10.0
    );
    let _ = writeln!(s, "<text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 12 {})\" text-anchor=\"middle\">{y_label}</text>", h / 2.0, h / 2.0);
    for (v, x, y, anchor) in [
        (x0, m, h - m + 16.0, "middle"),
        (x1, w - m, h - m + 16.0, "middle"),
        (y0, m - 4.0, h - m, "end"),
        (y1, m - 4.0, m + 4.0, "end"),
    ] {
        let _ = writeln!(s, "<text x=\"{x}\" y=\"{y}\" font-size=\"10\" text-anchor=\"{anchor}\">{v:.2}</text>");
    }
    let path: Vec<String> = finite.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    if !path.is_empty() {
        let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"blue\"/>", path.join(" "));
    }
    for &(x, y) in &finite {
        let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"blue\"/>", sx(x), sy(y));
    }
    s.push_str("</svg>\n");
    s
}

/// Min and max, widened so the range is never empty.
fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}
