//! Offline heatmap metrics, online episode metrics, and the threshold
//! ablation with its slope test.

use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::affordance::Heatmap;
use crate::batch::{map_ordered, Execution};
use crate::config::RunConfig;
use crate::error::{LrnError, Result};
use crate::label::{LabelClass, LabelHeatmap};
use crate::sim::episode::{run_episode, EpisodeResult, Outcome, Policy, Provider};
use crate::sim::intervention::oracle_shortest_path;
use crate::sim::scenario::ScenarioFile;

pub const DEFAULT_LABEL_THRESHOLD: f64 = 0.15;

/// Binarized ground truth. Unlabeled pixels have `labeled[i] == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLabels {
    pub width: u32,
    pub height: u32,
    pub positive: Vec<bool>,
    pub labeled: Vec<bool>,
}

impl BinaryLabels {
    pub fn counts(&self) -> (usize, usize) {
        let pos = self.positive.iter().zip(&self.labeled).filter(|(p, l)| **p && **l).count();
        let lab = self.labeled.iter().filter(|l| **l).count();
        (pos, lab - pos)
    }
}

fn check_t(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(LrnError::InvalidParameter(format!("threshold {t} outside [0, 1]")))
    }
}

/// Labeled pixel is positive iff its value is at least `t`.
pub fn binarize_labels(label: &LabelHeatmap, t: f64) -> Result<BinaryLabels> {
    check_t(t)?;
    Ok(BinaryLabels {
        width: label.width(),
        height: label.height(),
        positive: label.values().iter().map(|&v| v as f64 >= t).collect(),
        labeled: label.classes().iter().map(|&c| c != LabelClass::Unlabeled).collect(),
    })
}

/// Dense target heatmap: every pixel is labeled.
pub fn binarize_heatmap(hm: &Heatmap, t: f64) -> Result<BinaryLabels> {
    check_t(t)?;
    Ok(BinaryLabels {
        width: hm.width(),
        height: hm.height(),
        positive: hm.values().iter().map(|&v| v as f64 >= t).collect(),
        labeled: vec![true; hm.values().len()],
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, o: &ConfusionCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

fn check_dims(pred: &Heatmap, labels: &BinaryLabels) -> Result<()> {
    if (pred.width(), pred.height()) != (labels.width, labels.height) {
        return Err(LrnError::DimensionMismatch {
            expected: format!("{}x{}", labels.width, labels.height),
            actual: format!("{}x{}", pred.width(), pred.height()),
        });
    }
    Ok(())
}

/// Prediction is positive iff its value is at least `threshold`.
pub fn confusion_at(pred: &Heatmap, threshold: f64, labels: &BinaryLabels) -> Result<ConfusionCounts> {
    check_dims(pred, labels)?;
    let mut c = ConfusionCounts::default();
    for ((&p, &truth), &lab) in pred.values().iter().zip(&labels.positive).zip(&labels.labeled) {
        if !lab {
            continue;
        }
        match (p as f64 >= threshold, truth) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub fnr: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Undefined ratios are reported as 0.
pub fn metrics_from(c: &ConfusionCounts) -> Metrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Metrics { precision, recall, f1, fpr: ratio(c.fp, c.fp + c.tn), fnr: ratio(c.fn_, c.fn_ + c.tp) }
}

/// Area under the ROC curve as the Mann-Whitney statistic: the chance a
/// random positive outscores a random negative, ties counting one half.
pub fn auroc_scores(scores: &[f64], labels: &BinaryLabels) -> Result<f64> {
    if scores.len() != labels.positive.len() {
        return Err(LrnError::DimensionMismatch {
            expected: format!("{} scores", labels.positive.len()),
            actual: format!("{}", scores.len()),
        });
    }
    let mut pix: Vec<(f64, bool)> = scores
        .iter()
        .zip(&labels.positive)
        .zip(&labels.labeled)
        .filter(|(_, &l)| l)
        .map(|((&s, &p), _)| (s, p))
        .collect();
    let n_pos = pix.iter().filter(|p| p.1).count() as u64;
    let n_neg = pix.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(LrnError::UndefinedMetric("AUROC needs both positive and negative pixels"));
    }
    pix.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Twice the U statistic, kept integral so ties are exact.
    let mut u2: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < pix.len() {
        let mut j = i;
        let (mut p, mut n) = (0u128, 0u128);
        while j < pix.len() && pix[j].0 == pix[i].0 {
            if pix[j].1 {
                p += 1;
            } else {
                n += 1;
            }
            j += 1;
        }
        u2 += p * (2 * neg_below + n);
        neg_below += n;
        i = j;
    }
    Ok(u2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

pub fn auroc(pred: &Heatmap, labels: &BinaryLabels) -> Result<f64> {
    check_dims(pred, labels)?;
    let scores: Vec<f64> = pred.values().iter().map(|&v| v as f64).collect();
    auroc_scores(&scores, labels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Row with the highest F1; the first one on ties.
    pub best: usize,
}

impl Sweep {
    pub fn best_row(&self) -> &SweepRow {
        &self.rows[self.best]
    }
}

fn best_f1(rows: &[SweepRow]) -> usize {
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.metrics.f1 > rows[best].metrics.f1 {
            best = i;
        }
    }
    best
}

pub fn threshold_sweep(pred: &Heatmap, labels: &BinaryLabels, thresholds: &[f64]) -> Result<Sweep> {
    if thresholds.is_empty() {
        return Err(LrnError::EmptyInput("thresholds"));
    }
    let rows = thresholds
        .iter()
        .map(|&t| {
            let counts = confusion_at(pred, t, labels)?;
            Ok(SweepRow { threshold: t, counts, metrics: metrics_from(&counts) })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = best_f1(&rows);
    Ok(Sweep { rows, best })
}

/// Sweep over pooled counts of several images.
pub fn pooled_sweep(per_image: &[Sweep]) -> Result<Sweep> {
    let first = per_image.first().ok_or(LrnError::EmptyInput("sweeps"))?;
    let mut rows: Vec<SweepRow> =
        first.rows.iter().map(|r| SweepRow { counts: ConfusionCounts::default(), ..*r }).collect();
    for s in per_image {
        if s.rows.len() != rows.len() {
            return Err(LrnError::DimensionMismatch {
                expected: format!("{} thresholds", rows.len()),
                actual: format!("{}", s.rows.len()),
            });
        }
        for (acc, r) in rows.iter_mut().zip(&s.rows) {
            acc.counts.add(&r.counts);
        }
    }
    for r in &mut rows {
        r.metrics = metrics_from(&r.counts);
    }
    let best = best_f1(&rows);
    Ok(Sweep { rows, best })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeMetrics {
    pub distance_subopt: f64,
    pub time_subopt: f64,
    pub interventions: usize,
    pub success: bool,
}

/// Suboptimality against the shortest-path length `oracle_len`, with time
/// measured against driving that length at `v_max`.
pub fn episode_metrics(result: &EpisodeResult, oracle_len: f64, v_max: f64, dt: f64) -> Result<EpisodeMetrics> {
    if !(oracle_len > 0.0) {
        return Err(LrnError::InvalidParameter(format!("oracle length {oracle_len} must be positive")));
    }
    Ok(EpisodeMetrics {
        distance_subopt: result.distance_m / oracle_len,
        time_subopt: result.time_steps as f64 / (oracle_len / (v_max * dt)),
        interventions: result.intervention_count(),
        success: result.outcome == Outcome::Success,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeTest {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub n: usize,
    /// P(T <= t) with `n - 2` degrees of freedom: evidence for slope < 0.
    pub p_one_sided: f64,
}

/// Ordinary least squares of `y` on `x` with a one-sided t-test of slope < 0.
pub fn ols_slope_test(points: &[(f64, f64)]) -> Result<SlopeTest> {
    let n = points.len();
    if n < 3 {
        return Err(LrnError::Degenerate("slope test needs at least three points"));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(LrnError::Degenerate("x has no variance"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    let p_one_sided = if stderr > 0.0 {
        let t = StudentsT::new(0.0, 1.0, nf - 2.0).expect("positive dof");
        t.cdf(slope / stderr)
    } else if slope < 0.0 {
        0.0
    } else if slope > 0.0 {
        1.0
    } else {
        0.5
    };
    Ok(SlopeTest { slope, intercept, stderr, n, p_one_sided })
}

/// Slope over the fit range; `test` is `None` when fewer than three points
/// or fewer than two distinct `x` values are available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeSummary {
    pub n: usize,
    pub slope: Option<f64>,
    pub test: Option<SlopeTest>,
}

impl SlopeSummary {
    pub fn from_points(points: &[(f64, f64)]) -> Self {
        let test = ols_slope_test(points).ok();
        let slope = test.map(|t| t.slope).or_else(|| two_point_slope(points));
        SlopeSummary { n: points.len(), slope, test }
    }

    /// Slope below zero at significance `alpha`.
    pub fn significant(&self, alpha: f64) -> bool {
        self.test.is_some_and(|t| t.slope < 0.0 && t.p_one_sided < alpha)
    }
}

fn two_point_slope(points: &[(f64, f64)]) -> Option<f64> {
    match points {
        [a, b] if a.0 != b.0 => Some((b.1 - a.1) / (b.0 - a.0)),
        _ => None,
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        (s[m - 1] + s[m]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProviderKind {
    Oracle,
    Degraded { noise_level: f64 },
    Uniform,
}

impl ProviderKind {
    /// Provider for one episode; the degradation stream is keyed by `seed`.
    pub fn provider(&self, cfg: &RunConfig, seed: u64) -> Provider {
        match *self {
            ProviderKind::Oracle => Provider::Oracle(cfg.oracle()),
            ProviderKind::Degraded { noise_level } => Provider::Degraded { oracle: cfg.oracle(), noise_level, seed },
            ProviderKind::Uniform => Provider::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub threshold: f64,
    pub seed: u64,
    /// Error text when the scenario or episode could not run.
    pub result: std::result::Result<CellResult, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub distance_m: f64,
    pub interventions: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationPoint {
    pub threshold: f64,
    pub distances: Vec<f64>,
    pub interventions: Vec<usize>,
    pub median_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub cells: Vec<AblationCell>,
    pub points: Vec<AblationPoint>,
    /// Threshold with the lowest median distance.
    pub t_best: f64,
    /// Distance against threshold over `[thresholds[0], t_best]`.
    pub slope: SlopeSummary,
}

/// Runs LRN on `template` regenerated with each seed (world jitter and
/// provider noise both follow the seed) for every threshold.
pub fn ablation_run(
    template: &ScenarioFile,
    thresholds: &[f64],
    seeds: &[u64],
    provider: ProviderKind,
    cfg: &RunConfig,
    exec: Execution,
) -> Result<AblationReport> {
    if thresholds.len() < 2 || seeds.len() < 2 {
        return Err(LrnError::InvalidParameter("ablation needs at least two thresholds and two seeds".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(LrnError::InvalidParameter(format!("threshold {t} outside [0, 1]")));
    }
    let scenarios = map_ordered(exec, seeds, |_, &seed| {
        ScenarioFile { seed, ..template.clone() }.build().map_err(|e| e.to_string())
    });
    let grid: Vec<(usize, usize)> = (0..thresholds.len()).flat_map(|t| (0..seeds.len()).map(move |s| (t, s))).collect();
    let cells = map_ordered(exec, &grid, |_, &(ti, si)| {
        let (threshold, seed) = (thresholds[ti], seeds[si]);
        let result = scenarios[si].as_ref().map_err(Clone::clone).and_then(|sc| {
            let mut rc = cfg.clone();
            rc.h_thresh = threshold;
            let sim = rc.sim_config().map_err(|e| e.to_string())?;
            let r = run_episode(sc, &Policy::Lrn(provider.provider(&rc, seed)), &sim);
            Ok(CellResult { distance_m: r.distance_m, interventions: r.intervention_count(), outcome: r.outcome })
        });
        AblationCell { threshold, seed, result }
    });

    let points: Vec<AblationPoint> = thresholds
        .iter()
        .enumerate()
        .map(|(ti, &threshold)| {
            let ok: Vec<CellResult> = cells[ti * seeds.len()..(ti + 1) * seeds.len()]
                .iter()
                .filter_map(|c| c.result.as_ref().ok().copied())
                .collect();
            let distances: Vec<f64> = ok.iter().map(|c| c.distance_m).collect();
            AblationPoint {
                threshold,
                median_distance: median(&distances),
                interventions: ok.iter().map(|c| c.interventions).collect(),
                distances,
            }
        })
        .collect();

    let best = points
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.median_distance.is_nan())
        .min_by(|a, b| a.1.median_distance.total_cmp(&b.1.median_distance))
        .map(|(i, _)| i)
        .ok_or(LrnError::EmptyInput("no ablation cell ran"))?;
    let t_best = points[best].threshold;
    let lo = thresholds.iter().copied().fold(f64::INFINITY, f64::min);
    let fit: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.threshold >= lo && p.threshold <= t_best)
        .flat_map(|p| p.distances.iter().map(move |&d| (p.threshold, d)))
        .collect();
    Ok(AblationReport { cells, points, t_best, slope: SlopeSummary::from_points(&fit) })
}

impl AblationReport {
    /// `threshold,seed,distance_m,interventions,outcome`; failed cells carry
    /// an empty distance and `error` as the outcome.
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("threshold,seed,distance_m,interventions,outcome\n");
        for c in &self.cells {
            match &c.result {
                Ok(r) => {
                    let _ = writeln!(
                        out,
                        "{},{},{:.6},{},{}",
                        c.threshold,
                        c.seed,
                        r.distance_m,
                        r.interventions,
                        r.outcome.as_str()
                    );
                }
                Err(_) => {
                    let _ = writeln!(out, "{},{},,,error", c.threshold, c.seed);
                }
            }
        }
        out
    }

    /// One row per threshold; slope and p describe the fit over `[0, t_best]`.
    pub fn summary_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        let slope = fmt(self.slope.slope);
        let p = fmt(self.slope.test.map(|t| t.p_one_sided));
        let mut out = String::from("threshold,median_distance_m,t_best,slope,p_one_sided,n_fit\n");
        for pt in &self.points {
            let _ = writeln!(
                out,
                "{},{:.6},{},{},{},{}",
                pt.threshold, pt.median_distance, self.t_best, slope, p, self.slope.n
            );
        }
        out
    }
}

/// Shortest-path length of a scenario for suboptimality ratios.
pub fn scenario_oracle_len(sc: &crate::sim::scenario::Scenario) -> Result<f64> {
    oracle_shortest_path(&sc.world, sc.start.position(), sc.goal)
}
