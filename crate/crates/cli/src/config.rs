//! Command-line flags, config files, and their resolution into a [`RunConfig`].

use std::collections::hash_map::RandomState;
use std::hash::{BuildHasher, Hasher};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use memchart::design::{default_grid, Budget, Preset, TABLE_WEIGHTS};
use memchart::mcsim::Simulator;
use memchart::model::{catalog, load_instance, read_instances, Instance, INSTANCE_IDS};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(
    name = "memchart",
    version,
    about = "Economic design experiments for EWMA/MEWMA control charts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulated cost next to the ARL formula and the corrected formula.
    Evaluate(RunArgs),
    /// Conditional out-of-control ARL series with AARL1, ANFA and ARL0.
    Arl(RunArgs),
    /// Grid search over the smoothing weight and the resulting cost increment.
    Optimize(RunArgs),
    /// Small and large budget simulations against the ARL formula, timed.
    Bench(RunArgs),
    /// List or export the instance catalog.
    #[command(subcommand)]
    Instances(InstancesCommand),
}

#[derive(Subcommand, Debug)]
pub enum InstancesCommand {
    /// One summary row per instance.
    List(ListArgs),
    /// Full instance definitions as JSON, readable by `--instances-file`.
    Export(ListArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ListArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Read instances from this JSON file instead of the built-in catalog.
    #[arg(long)]
    pub instances_file: Option<PathBuf>,
}

/// Flags shared by the computing subcommands. A config file given with
/// `--config` supplies the same keys (kebab-case); flags win.
#[derive(Args, Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunArgs {
    /// Instance ids, comma separated; `all` selects every instance.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub instance: Vec<String>,
    /// Weights to evaluate, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub r: Vec<f64>,
    /// Search grid, `start:stop:step` or a comma-separated list.
    #[arg(long)]
    pub r_grid: Option<String>,
    /// Cycles per simulated cost (grid points and the large comparison run).
    #[arg(long)]
    pub n_cycles: Option<u64>,
    /// Cycles for the small comparison run.
    #[arg(long)]
    pub small_cycles: Option<u64>,
    /// Runs for each zero-state ARL estimate.
    #[arg(long)]
    pub arl_runs: Option<u64>,
    /// Runs per shift interval in the AARL1 profile.
    #[arg(long)]
    pub runs_per_m: Option<u64>,
    #[arg(long)]
    pub anfa_runs: Option<u64>,
    /// Truncation tolerance for the shift-interval distribution.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "MEMCHART_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub preset: Option<PresetName>,
    #[arg(long)]
    pub instances_file: Option<PathBuf>,
    /// Also minimize the corrected formula (optimize only).
    #[arg(long)]
    #[serde(default)]
    pub with_modified: bool,
    /// TOML or JSON file with default values for these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    Ci,
    Paper,
}

impl From<PresetName> for Preset {
    fn from(p: PresetName) -> Self {
        match p {
            PresetName::Ci => Preset::Ci,
            PresetName::Paper => Preset::Paper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Evaluate,
    Arl,
    Optimize,
    Bench,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Evaluate => "evaluate",
            CommandKind::Arl => "arl",
            CommandKind::Optimize => "optimize",
            CommandKind::Bench => "bench",
        }
    }
}

/// A fully resolved and validated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub instances: Vec<Instance>,
    /// Weights to evaluate, or the search grid for `optimize`.
    pub weights: Vec<f64>,
    pub budget: Budget,
    pub preset: PresetName,
    pub seed: u64,
    pub seed_generated: bool,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub with_modified: bool,
}

impl RunConfig {
    pub fn simulator(&self) -> Result<Simulator> {
        match self.workers {
            Some(n) => Ok(Simulator::with_workers(n)?),
            None => Ok(Simulator::default()),
        }
    }
}

fn read_config_file(path: &Path) -> Result<RunArgs> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let parsed = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        serde_json::from_str(&text).map_err(anyhow::Error::from)
    } else {
        toml::from_str(&text).map_err(anyhow::Error::from)
    };
    parsed.with_context(|| format!("invalid config file {}", path.display()))
}

/// Flag values where given, file values otherwise.
fn merge(flags: RunArgs, file: RunArgs) -> RunArgs {
    RunArgs {
        instance: if flags.instance.is_empty() {
            file.instance
        } else {
            flags.instance
        },
        r: if flags.r.is_empty() { file.r } else { flags.r },
        r_grid: flags.r_grid.or(file.r_grid),
        n_cycles: flags.n_cycles.or(file.n_cycles),
        small_cycles: flags.small_cycles.or(file.small_cycles),
        arl_runs: flags.arl_runs.or(file.arl_runs),
        runs_per_m: flags.runs_per_m.or(file.runs_per_m),
        anfa_runs: flags.anfa_runs.or(file.anfa_runs),
        epsilon: flags.epsilon.or(file.epsilon),
        seed: flags.seed.or(file.seed),
        workers: flags.workers.or(file.workers),
        out: flags.out.or(file.out),
        format: flags.format.or(file.format),
        preset: flags.preset.or(file.preset),
        instances_file: flags.instances_file.or(file.instances_file),
        with_modified: flags.with_modified || file.with_modified,
        config: flags.config,
    }
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let grid = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step): (f64, f64, f64) =
                (start.parse()?, stop.parse()?, step.parse()?);
            if step.is_nan() || step <= 0.0 || stop < start {
                bail!("grid `{text}` needs step > 0 and stop >= start");
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=count)
                .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
                .collect()
        }
        [_] => text
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("cannot parse weight grid `{text}`"))?,
        _ => bail!("grid `{text}` must be `start:stop:step` or a comma-separated list"),
    };
    Ok(grid)
}

/// Instances from the built-in catalog or from `file`, filtered by `ids`.
pub fn select_instances(ids: &[String], file: Option<&Path>) -> Result<Vec<Instance>> {
    let pool = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read instances file {}", path.display()))?;
            read_instances(&text)
                .with_context(|| format!("invalid instances file {}", path.display()))?
        }
        None => catalog(),
    };
    if ids.is_empty() {
        if file.is_some() {
            return Ok(pool);
        }
        bail!(
            "no instance selected; pass --instance with one of {} or `all`",
            INSTANCE_IDS.join(", ")
        );
    }
    if ids.iter().any(|id| id == "all") {
        return Ok(pool);
    }
    ids.iter()
        .map(|id| match file {
            None => Ok(load_instance(id)?),
            Some(path) => pool.iter().find(|i| &i.id == id).cloned().with_context(|| {
                let known: Vec<&str> = pool.iter().map(|i| i.id.as_str()).collect();
                format!(
                    "unknown instance `{id}` in {} (known: {})",
                    path.display(),
                    known.join(", ")
                )
            }),
        })
        .collect()
}

fn generate_seed() -> u64 {
    let mut h = RandomState::new().build_hasher();
    h.write_u128(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or_default(),
    );
    h.write_u32(std::process::id());
    h.finish()
}

fn at_least_one(flag: &str, value: Option<u64>) -> Result<()> {
    if value == Some(0) {
        bail!("--{flag} must be at least 1");
    }
    Ok(())
}

/// Output format: explicit, else from the output file extension, else CSV.
pub fn output_format(format: Option<Format>, out: Option<&Path>) -> Format {
    format.unwrap_or_else(|| match out.and_then(|p| p.extension()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    })
}

pub fn resolve(command: CommandKind, flags: RunArgs) -> Result<RunConfig> {
    let args = match &flags.config {
        Some(path) => {
            let file = read_config_file(path)?;
            merge(flags, file)
        }
        None => flags,
    };

    at_least_one("n-cycles", args.n_cycles)?;
    at_least_one("small-cycles", args.small_cycles)?;
    at_least_one("arl-runs", args.arl_runs)?;
    at_least_one("runs-per-m", args.runs_per_m)?;
    at_least_one("anfa-runs", args.anfa_runs)?;
    if args.workers == Some(0) {
        bail!("--workers must be at least 1");
    }

    let preset = args.preset.unwrap_or(PresetName::Paper);
    let mut budget = Budget::preset(preset.into());
    if let Some(n) = args.n_cycles {
        budget.grid_cycles = n;
        budget.large_cycles = n;
    }
    if let Some(n) = args.small_cycles {
        budget.small_cycles = n;
    }
    if let Some(n) = args.arl_runs {
        budget.arl_runs = n;
    }
    if let Some(n) = args.runs_per_m {
        budget.runs_per_m = n;
    }
    if let Some(n) = args.anfa_runs {
        budget.anfa_runs = n;
    }
    if let Some(eps) = args.epsilon {
        budget.epsilon = eps;
    }
    budget.validate()?;

    let weights = match (&args.r_grid, args.r.is_empty(), command) {
        (Some(grid), _, _) => parse_grid(grid)?,
        (None, false, _) => args.r.clone(),
        (None, true, CommandKind::Optimize) => default_grid(),
        (None, true, _) => TABLE_WEIGHTS.to_vec(),
    };
    if weights.is_empty() {
        bail!("no weights to evaluate");
    }
    if let Some(r) = weights.iter().find(|&&r| !(r > 0.0 && r <= 1.0)) {
        bail!("weights must lie in (0, 1], got {r}");
    }

    let instances = select_instances(&args.instance, args.instances_file.as_deref())?;
    let (seed, seed_generated) = match args.seed {
        Some(s) => (s, false),
        None => (generate_seed(), true),
    };
    let format = output_format(args.format, args.out.as_deref());

    Ok(RunConfig {
        command,
        instances,
        weights,
        budget,
        preset,
        seed,
        seed_generated,
        workers: args.workers,
        out: args.out,
        format,
        with_modified: args.with_modified,
    })
}
