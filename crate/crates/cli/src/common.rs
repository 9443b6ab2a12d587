//! Flags shared by the subcommands: configuration layering, list parsing
//! and output helpers.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;

use lrn_core::config::{Profile, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Spot,
    Racer,
    Custom,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Spot => Profile::Spot,
            ProfileArg::Racer => Profile::Racer,
            ProfileArg::Custom => Profile::Custom,
        }
    }
}

/// Precedence, lowest first: profile preset, `--config` file, `--set`
/// pairs, then the dedicated flags.
#[derive(Debug, Clone, clap::Args)]
pub struct ConfigArgs {
    /// Parameter preset; replaces the config file's `profile` key.
    #[arg(long, value_enum)]
    pub profile: Option<ProfileArg>,
    /// TOML file overriding preset values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any config key, e.g. `--set alpha=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub h_thresh: Option<f64>,
    #[arg(long)]
    pub noise_level: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub print_config: bool,
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = self.profile.map(Profile::from).unwrap_or(Profile::Spot);
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let mut table: toml::Table =
                    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                if self.profile.is_some() {
                    table.remove("profile");
                }
                RunConfig::parse_overlay(&table.to_string(), base).with_context(|| format!("in {}", path.display()))?
            }
            None => RunConfig::preset(base),
        };
        let mut table: toml::Table = toml::from_str(&cfg.to_toml())?;
        for pair in &self.set {
            let (k, v) = pair.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got '{pair}'"))?;
            let k = k.trim();
            if !table.contains_key(k) || k == "profile" {
                bail!("--set: unknown config key '{k}'");
            }
            table.insert(k.to_string(), parse_value(v.trim()));
        }
        let flags: [(&str, Option<toml::Value>); 4] = [
            ("seed", self.seed.map(|v| toml::Value::Integer(v as i64))),
            ("h_thresh", self.h_thresh.map(toml::Value::Float)),
            ("noise_level", self.noise_level.map(toml::Value::Float)),
            ("max_steps", self.max_steps.map(|v| toml::Value::Integer(v as i64))),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                table.insert(k.to_string(), v);
            }
        }
        cfg = RunConfig::parse_overlay(&table.to_string(), cfg.profile)?;
        Ok(cfg)
    }
}

/// Comma-separated numbers.
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| anyhow!("'{x}' is not a number"))).collect()
}

/// Comma-separated seeds and inclusive ranges, e.g. `0-4,7`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("empty seed range '{part}'");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().map_err(|_| anyhow!("'{part}' is not a seed"))?),
        }
    }
    Ok(out)
}

/// `KEY=VALUE` with a numeric value.
pub fn parse_param(s: &str) -> Result<(String, f64)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("expected KEY=VALUE, got '{s}'"))?;
    Ok((k.trim().to_string(), v.trim().parse().map_err(|_| anyhow!("'{v}' is not a number"))?))
}

pub fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Applies `LRN_THREADS` to the worker pool.
pub fn threads_from_env() -> Result<()> {
    let Ok(raw) = std::env::var("LRN_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| anyhow!("LRN_THREADS must be a positive integer, got '{raw}'"))?;
    lrn_core::batch::init_threads(n)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> ConfigArgs {
        ConfigArgs {
            profile: None,
            config: None,
            set: Vec::new(),
            seed: None,
            h_thresh: None,
            noise_level: None,
            max_steps: None,
            print_config: false,
        }
    }

    #[test]
    fn flags_override_sets_override_profile() {
        let mut a = args();
        a.profile = Some(ProfileArg::Racer);
        a.set = vec!["alpha=0.3".into(), "window=square".into(), "h_thresh=0.5".into()];
        a.h_thresh = Some(0.6);
        let c = a.resolve().unwrap();
        assert_eq!((c.alpha, c.h_thresh, c.sigma_g_deg), (0.3, 0.6, 70.0));
        assert_eq!(c.window, lrn_core::config::WindowKind::Square);
    }

    #[test]
    fn bad_sets_are_rejected() {
        let mut a = args();
        a.set = vec!["nope=1".into()];
        assert!(a.resolve().is_err());
        a.set = vec!["alpha".into()];
        assert!(a.resolve().is_err());
        a.set = vec!["alpha=7".into()];
        assert!(a.resolve().is_err());
    }

    #[test]
    fn list_parsing() {
        assert_eq!(parse_seeds("0-2,7").unwrap(), vec![0, 1, 2, 7]);
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("x").is_err());
        assert_eq!(parse_f64_list("0, 0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_f64_list("0,,1").is_err());
        assert_eq!(parse_param("width_m=8").unwrap(), ("width_m".to_string(), 8.0));
    }
}
