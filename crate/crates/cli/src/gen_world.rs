use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};

use lrn_core::io::world_pgm;
use lrn_core::sim::scenario::{bug_trap_file, ScenarioFile};
use lrn_core::sim::worldgen::{generate_world, WorldConfig, WorldKind, WorldSpec};

use crate::common::{parse_f64_list, parse_param};

/// Generate a world as a PGM grid, optionally with a scenario file.
#[derive(Debug, clap::Args)]
pub struct Args {
    /// open, bug-trap, treeline-gap or random-clutter.
    #[arg(long, default_value = "open", conflicts_with = "standard_bug_trap")]
    pub kind: String,
    /// Kind-specific parameter, e.g. `--param width_m=8`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100.0)]
    pub size_m: f64,
    #[arg(long, default_value_t = 0.5)]
    pub resolution: f64,
    /// Start pose `x,y,yaw_deg`; needed with `--scenario-out`.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
    /// Goal `x,y`; needed with `--scenario-out`.
    #[arg(long, allow_hyphen_values = true)]
    pub goal: Option<String>,
    /// Use the standard bug-trap scenario for `--seed`.
    #[arg(long)]
    pub standard_bug_trap: bool,
    /// PGM output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the scenario TOML here.
    #[arg(long)]
    pub scenario_out: Option<PathBuf>,
}

fn scenario_file(args: &Args) -> Result<Option<ScenarioFile>> {
    if args.standard_bug_trap {
        return Ok(Some(bug_trap_file(args.seed)));
    }
    let (start, goal) = match (&args.start, &args.goal) {
        (Some(s), Some(g)) => (parse_f64_list(s)?, parse_f64_list(g)?),
        (None, None) => return Ok(None),
        _ => bail!("--start and --goal go together"),
    };
    let (&[x, y, yaw], &[gx, gy]) = (start.as_slice(), goal.as_slice()) else {
        bail!("--start needs x,y,yaw_deg and --goal needs x,y")
    };
    let params: BTreeMap<String, f64> = args.params.iter().map(|p| parse_param(p)).collect::<Result<_>>()?;
    Ok(Some(ScenarioFile {
        name: format!("{}-{}", args.kind, args.seed),
        kind: args.kind.clone(),
        seed: args.seed,
        size_m: args.size_m,
        resolution: args.resolution,
        start: [x, y, yaw],
        goal: [gx, gy],
        params,
    }))
}

pub fn run(args: Args) -> Result<ExitCode> {
    let scenario = scenario_file(&args)?;
    let world = match &scenario {
        Some(f) => f.build()?.world,
        None => {
            if args.scenario_out.is_some() {
                bail!("--scenario-out needs --start and --goal, or --standard-bug-trap");
            }
            let kind = WorldKind::parse(&args.kind)?;
            let params: BTreeMap<String, f64> = args.params.iter().map(|p| parse_param(p)).collect::<Result<_>>()?;
            let cfg = WorldConfig {
                size_m: args.size_m,
                resolution: args.resolution,
                spec: WorldSpec::from_params(kind, args.size_m, &params, Vec::new())?,
            };
            generate_world(&cfg, args.seed)?
        }
    };
    std::fs::write(&args.out, world_pgm(&world)).with_context(|| format!("writing {}", args.out.display()))?;
    if let (Some(path), Some(f)) = (&args.scenario_out, &scenario) {
        std::fs::write(path, f.to_toml()).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{}x{} cells, {} interior obstacle cells", world.width(), world.height(), world.interior_lethal_count());
    Ok(ExitCode::SUCCESS)
}
