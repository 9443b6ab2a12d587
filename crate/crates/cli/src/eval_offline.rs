use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};

use lrn_core::eval::{
    auroc, auroc_scores, binarize_heatmap, binarize_labels, pooled_sweep, threshold_sweep, BinaryLabels, Sweep,
    DEFAULT_LABEL_THRESHOLD,
};
use lrn_core::io::{decode_mask, list_files, read_heatmap};
use lrn_core::label::LabelHeatmap;

use crate::common::{ensure_dir, parse_f64_list, write};

/// Score predicted heatmaps against labels matched by file name.
#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of predicted `.lrnh` heatmaps.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of label `.lrnh` files, each with an optional `.lrnm` mask.
    #[arg(long)]
    pub labels: PathBuf,
    /// Prediction thresholds; defaults to 0, 0.05, ..., 1.
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Label values at or above this count as positive.
    #[arg(long, default_value_t = DEFAULT_LABEL_THRESHOLD)]
    pub label_threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn stems(files: &[PathBuf]) -> BTreeMap<String, PathBuf> {
    files.iter().map(|p| (p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), p.clone())).collect()
}

fn load_labels(path: &Path, t: f64) -> Result<BinaryLabels> {
    let values = read_heatmap(path)?;
    let mask_path = path.with_extension("lrnm");
    if !mask_path.exists() {
        return Ok(binarize_heatmap(&values, t)?);
    }
    let (w, h, mask) = decode_mask(&std::fs::read(&mask_path)?).with_context(|| format!("{}", mask_path.display()))?;
    if (w, h) != (values.width(), values.height()) {
        bail!("{}: mask is {w}x{h}, heatmap is {}x{}", mask_path.display(), values.width(), values.height());
    }
    Ok(binarize_labels(&LabelHeatmap::from_parts(values, &mask)?, t)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

pub fn run(args: Args) -> Result<ExitCode> {
    let thresholds = match &args.thresholds {
        Some(s) => parse_f64_list(s)?,
        None => (0..=20).map(|i| i as f64 / 20.0).collect(),
    };
    let preds = stems(&list_files(&args.pred, "lrnh")?);
    let labels = stems(&list_files(&args.labels, "lrnh")?);
    let orphans: Vec<String> = preds
        .keys()
        .filter(|k| !labels.contains_key(*k))
        .map(|k| format!("prediction without label: {k}"))
        .chain(labels.keys().filter(|k| !preds.contains_key(*k)).map(|k| format!("label without prediction: {k}")))
        .collect();
    if !orphans.is_empty() {
        bail!("unmatched files:\n  {}", orphans.join("\n  "));
    }
    if preds.is_empty() {
        bail!("no .lrnh files in {}", args.pred.display());
    }

    let mut per_image = String::from("name,auroc,best_threshold,precision,recall,f1,fpr,fnr\n");
    let mut sweeps: Vec<Sweep> = Vec::new();
    let mut all_scores = Vec::new();
    let mut all_pos = Vec::new();
    let mut all_lab = Vec::new();
    for (name, pred_path) in &preds {
        let pred = read_heatmap(pred_path)?;
        let lab = load_labels(&labels[name], args.label_threshold)?;
        let sweep = threshold_sweep(&pred, &lab, &thresholds).with_context(|| name.clone())?;
        let a = auroc(&pred, &lab).ok();
        let b = sweep.best_row();
        let _ = writeln!(
            per_image,
            "{name},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            fmt_opt(a),
            b.threshold,
            b.metrics.precision,
            b.metrics.recall,
            b.metrics.f1,
            b.metrics.fpr,
            b.metrics.fnr
        );
        all_scores.extend(pred.values().iter().map(|&v| v as f64));
        all_pos.extend_from_slice(&lab.positive);
        all_lab.extend_from_slice(&lab.labeled);
        sweeps.push(sweep);
    }
    let pooled = pooled_sweep(&sweeps)?;
    let n = all_scores.len() as u32;
    let total = BinaryLabels { width: n, height: 1, positive: all_pos, labeled: all_lab };
    let pooled_auroc = auroc_scores(&all_scores, &total).ok();

    let mut metrics = String::from("threshold,tp,fp,tn,fn,precision,recall,f1,fpr,fnr,auroc,best\n");
    for (i, r) in pooled.rows.iter().enumerate() {
        let m = r.metrics;
        let _ = writeln!(
            metrics,
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.threshold,
            r.counts.tp,
            r.counts.fp,
            r.counts.tn,
            r.counts.fn_,
            m.precision,
            m.recall,
            m.f1,
            m.fpr,
            m.fnr,
            fmt_opt(pooled_auroc),
            u8::from(i == pooled.best)
        );
    }
    ensure_dir(&args.out)?;
    write(&args.out, "metrics.csv", metrics)?;
    write(&args.out, "per_image.csv", per_image)?;
    let b = pooled.best_row();
    println!(
        "{} images; AUROC {}; best F1 {:.4} at threshold {} (precision {:.4}, recall {:.4})",
        preds.len(),
        pooled_auroc.map_or("undefined".into(), |a| format!("{a:.4}")),
        b.metrics.f1,
        b.threshold,
        b.metrics.precision,
        b.metrics.recall
    );
    Ok(ExitCode::SUCCESS)
}
