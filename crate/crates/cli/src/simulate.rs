use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::Serialize;

use lrn_core::config::{parse_cameras, RunConfig};
use lrn_core::eval::{episode_metrics, scenario_oracle_len};
use lrn_core::io::{list_files, read_heatmap};
use lrn_core::sim::episode::{run_episode, Outcome, Policy, Provider, ReplaySource};
use lrn_core::sim::scenario::ScenarioFile;
use lrn_core::svg::episode_svg;

use crate::common::{ensure_dir, write, ConfigArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Lrn,
    GoalHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    Oracle,
    Degraded,
    Uniform,
    Replay,
}

/// Run one episode and write its trajectory and summary.
#[derive(Debug, clap::Args)]
pub struct Args {
    /// Scenario TOML file.
    #[arg(long, required_unless_present = "print_config")]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "lrn")]
    pub policy: PolicyArg,
    /// Affordance source for `--policy lrn`.
    #[arg(long, value_enum, default_value = "oracle")]
    pub provider: ProviderArg,
    /// Recorded LRNH heatmaps replayed in file-name order, one per camera
    /// per step. Implies `--provider replay`.
    #[arg(long)]
    pub heatmap_dir: Option<PathBuf>,
    /// Camera TOML file for replayed heatmaps.
    #[arg(long)]
    pub cameras: Option<PathBuf>,
    #[arg(long, required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
    /// Also write an SVG of the world and the driven path.
    #[arg(long)]
    pub svg: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    policy: &'a str,
    provider: &'a str,
    outcome: &'a str,
    failure: String,
    distance_m: f64,
    time_steps: usize,
    time_s: f64,
    interventions: usize,
    oracle_path_m: f64,
    distance_subopt: f64,
    time_subopt: f64,
}

fn replay_source(args: &Args) -> Result<ReplaySource> {
    let dir = args.heatmap_dir.as_ref().context("--provider replay needs --heatmap-dir")?;
    let cams_path = args.cameras.as_ref().context("replayed heatmaps need --cameras")?;
    let cameras = parse_cameras(
        &std::fs::read_to_string(cams_path).with_context(|| format!("reading {}", cams_path.display()))?,
    )?;
    let files = list_files(dir, "lrnh")?;
    if files.is_empty() || files.len() % cameras.len() != 0 {
        bail!("{} heatmaps cannot be split across {} cameras", files.len(), cameras.len());
    }
    let maps = files.iter().map(|p| read_heatmap(p)).collect::<lrn_core::Result<Vec<_>>>()?;
    let frames = maps.chunks(cameras.len()).map(<[_]>::to_vec).collect();
    Ok(ReplaySource { cameras, frames })
}

fn policy(args: &Args, cfg: &RunConfig) -> Result<(Policy, &'static str)> {
    if args.policy == PolicyArg::GoalHeuristic {
        return Ok((Policy::GoalHeuristic, "none"));
    }
    let kind = if args.heatmap_dir.is_some() { ProviderArg::Replay } else { args.provider };
    Ok(match kind {
        ProviderArg::Oracle => (Policy::Lrn(Provider::Oracle(cfg.oracle())), "oracle"),
        ProviderArg::Degraded => (
            Policy::Lrn(Provider::Degraded { oracle: cfg.oracle(), noise_level: cfg.noise_level, seed: cfg.seed }),
            "degraded",
        ),
        ProviderArg::Uniform => (Policy::Lrn(Provider::Uniform), "uniform"),
        ProviderArg::Replay => (Policy::Lrn(Provider::Replay(replay_source(args)?)), "replay"),
    })
}

pub fn run(args: Args) -> Result<ExitCode> {
    let cfg = args.config.resolve()?;
    if args.config.print_config {
        print!("{}", cfg.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    let (Some(scn_path), Some(out)) = (&args.scenario, &args.out) else { bail!("--scenario and --out are required") };
    let file = ScenarioFile::load(scn_path).with_context(|| format!("loading {}", scn_path.display()))?;
    let scenario = file.build()?;
    let sim = cfg.sim_config()?;
    let (policy, provider) = policy(&args, &cfg)?;
    let result = run_episode(&scenario, &policy, &sim);

    let oracle_len = scenario_oracle_len(&scenario)?;
    let m = episode_metrics(&result, oracle_len, cfg.v_max, cfg.dt)?;
    let summary = Summary {
        scenario: &scenario.name,
        policy: match args.policy {
            PolicyArg::Lrn => "lrn",
            PolicyArg::GoalHeuristic => "goal-heuristic",
        },
        provider,
        outcome: result.outcome.as_str(),
        failure: result.failure.clone().unwrap_or_default(),
        distance_m: result.distance_m,
        time_steps: result.time_steps,
        time_s: result.time_steps as f64 * cfg.dt,
        interventions: m.interventions,
        oracle_path_m: oracle_len,
        distance_subopt: m.distance_subopt,
        time_subopt: m.time_subopt,
    };
    ensure_dir(out)?;
    write(out, "trajectory.csv", result.trajectory_csv(cfg.dt))?;
    write(out, "summary.toml", toml::to_string(&summary)?)?;
    if args.svg {
        write(out, "episode.svg", episode_svg(&scenario.world, &result, scenario.goal))?;
    }
    println!(
        "{}: {} after {:.1} m, {} interventions, distance suboptimality {:.3}",
        scenario.name, summary.outcome, result.distance_m, m.interventions, m.distance_subopt
    );
    Ok(if result.outcome == Outcome::Success { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
