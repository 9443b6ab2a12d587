use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;

use lrn_core::batch::Execution;
use lrn_core::eval::{ablation_run, ProviderKind};
use lrn_core::sim::scenario::{bug_trap_file, ScenarioFile};
use lrn_core::svg::line_plot_svg;

use crate::common::{ensure_dir, parse_f64_list, parse_seeds, write, ConfigArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    Oracle,
    Degraded,
    Uniform,
}

/// Sweep the affordance threshold over seeds and test the distance trend.
#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scenario template; its seed is replaced by each run seed. Defaults to
    /// the standard bug trap.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, default_value = "0,0.2,0.4,0.6,0.8,1.0")]
    pub thresholds: String,
    /// Seeds and inclusive ranges, e.g. `0-9` or `1,4,9`.
    #[arg(long, default_value = "0-9")]
    pub seeds: String,
    #[arg(long, value_enum, default_value = "degraded")]
    pub provider: ProviderArg,
    #[arg(long, required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
    /// Also write a median-distance plot.
    #[arg(long)]
    pub svg: bool,
    /// Run cells one at a time instead of on the worker pool.
    #[arg(long)]
    pub sequential: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(args: Args) -> Result<ExitCode> {
    let cfg = args.config.resolve()?;
    if args.config.print_config {
        print!("{}", cfg.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    let Some(out) = &args.out else { bail!("--out is required") };
    let template = match &args.scenario {
        Some(p) => ScenarioFile::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => bug_trap_file(0),
    };
    let thresholds = parse_f64_list(&args.thresholds)?;
    let seeds = parse_seeds(&args.seeds)?;
    let provider = match args.provider {
        ProviderArg::Oracle => ProviderKind::Oracle,
        ProviderArg::Degraded => ProviderKind::Degraded { noise_level: cfg.noise_level },
        ProviderArg::Uniform => ProviderKind::Uniform,
    };
    let exec = if args.sequential { Execution::Sequential } else { Execution::default() };
    let report = ablation_run(&template, &thresholds, &seeds, provider, &cfg, exec)?;

    ensure_dir(out)?;
    write(out, "ablation.csv", report.cells_csv())?;
    write(out, "ablation_summary.csv", report.summary_csv())?;
    if args.svg {
        let pts: Vec<(f64, f64)> = report.points.iter().map(|p| (p.threshold, p.median_distance)).collect();
        write(out, "ablation.svg", line_plot_svg(&pts, "h_thresh", "median distance (m)"))?;
    }
    for p in &report.points {
        println!(
            "h_thresh {:.2}: median distance {:.1} m over {} runs",
            p.threshold,
            p.median_distance,
            p.distances.len()
        );
    }
    match report.slope.test {
        Some(t) => println!(
            "best threshold {:.2}; slope over [{:.2}, {:.2}] = {:.2} m per unit, one-sided p = {:.4}",
            report.t_best,
            thresholds.iter().copied().fold(f64::INFINITY, f64::min),
            report.t_best,
            t.slope,
            t.p_one_sided
        ),
        None => println!("best threshold {:.2}; too few points ({}) for a slope test", report.t_best, report.slope.n),
    }
    Ok(ExitCode::SUCCESS)
}
