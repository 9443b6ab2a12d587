use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};

use lrn_core::io::{encode_heatmap, encode_mask};
use lrn_core::label::{label_tracks, parse_tracks, segment_tracks, LabelOptions};

use crate::common::{ensure_dir, write};

/// Turn a point-track CSV into heatmap labels and masks.
#[derive(Debug, clap::Args)]
pub struct Args {
    /// CSV with header `track_id,frame,u,v,visible`.
    #[arg(long)]
    pub tracks: PathBuf,
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    /// Bottom fraction of the image where tracks must end to be used.
    #[arg(long, default_value_t = 0.2)]
    pub band: f64,
    /// Half-width in pixels of the negative column through each hotspot.
    #[arg(long, default_value_t = 5)]
    pub w_col: u32,
    /// Gaussian blur around hotspots, in pixels.
    #[arg(long)]
    pub blur_sigma: Option<f64>,
    /// Frames per labeled segment; defaults to the whole file.
    #[arg(long)]
    pub segment_frames: Option<u32>,
    /// Frames between segment starts; defaults to the segment length.
    #[arg(long)]
    pub stride: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: Args) -> Result<ExitCode> {
    if args.width == 0 || args.height == 0 {
        bail!("--width and --height must be positive");
    }
    let text = std::fs::read_to_string(&args.tracks).with_context(|| format!("reading {}", args.tracks.display()))?;
    let tracks = parse_tracks(&text).with_context(|| format!("{}", args.tracks.display()))?;
    if tracks.is_empty() {
        eprintln!("warning: {} has no tracks; nothing written", args.tracks.display());
        return Ok(ExitCode::SUCCESS);
    }
    let opts = LabelOptions { band: args.band, w_col: args.w_col, blur_sigma: args.blur_sigma };
    let segment = args.segment_frames.unwrap_or(u32::MAX);
    let stride = args.stride.unwrap_or(segment);
    let stem = args.tracks.file_stem().unwrap_or_default().to_string_lossy().into_owned();

    ensure_dir(&args.out)?;
    let mut hot_csv = String::from("segment_start,frame,u,v\n");
    let mut written = 0;
    for (start, seg) in segment_tracks(&tracks, segment, stride)? {
        let (label, hotspots) = label_tracks(&seg, args.width, args.height, &opts)?;
        let name = format!("{stem}_f{start:06}");
        write(&args.out, &format!("{name}.lrnh"), encode_heatmap(&label.to_heatmap()))?;
        write(&args.out, &format!("{name}.lrnm"), encode_mask(args.width, args.height, &label.mask_bytes())?)?;
        for h in &hotspots {
            let _ = writeln!(hot_csv, "{start},{},{:.6},{:.6}", h.frame, h.u, h.v);
        }
        written += 1;
    }
    write(&args.out, "hotspots.csv", hot_csv)?;
    println!("{written} labels written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}
