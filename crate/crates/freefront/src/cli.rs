use std::path::PathBuf;

use clap::{Parser, Subcommand};
use freefront_core::variants::VariantKind;

use crate::commands;
use crate::config::{self, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{manifest_text, ManifestInfo, OutDir};

#[derive(Debug, Parser)]
#[command(name = "freefront", version, about = "Front of branching Brownian motions with leftmost selection")]
pub struct Cli {
    /// TOML run configuration; the reference defaults apply without it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override one key, e.g. `--set grid.h=0.02`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Output directory; replaces `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Master seed of the particle replicas; replaces `particles.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for replica runs.
    #[arg(long, global = true, env = "FREEFRONT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Fixed-point front, fields and contract report.
    Solve,
    /// Finite-difference oracle at a given velocity path.
    OracleFd {
        /// Front table whose `V` column drives the oracle; constant V0 otherwise.
        #[arg(long, value_name = "CSV")]
        velocity: Option<PathBuf>,
    },
    /// Particle replicas: front statistics and histograms.
    Particles,
    /// Solver against both oracles; exit status 0 iff every check passes.
    Compare,
    /// Datum calibration only.
    Calibrate,
    /// Solve one of the edge-value variants.
    Variant {
        /// One of bbd_alpha, bbd_beta, local_nbbm
        #[arg(long, value_parser = parse_kind)]
        kind: VariantKind,
    },
    /// Print the reference configuration.
    Defaults,
}

fn parse_kind(s: &str) -> Result<VariantKind, String> {
    s.parse().map_err(|e: freefront_core::Error| e.to_string())
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::OracleFd { .. } => "oracle-fd",
            Command::Particles => "particles",
            Command::Compare => "compare",
            Command::Calibrate => "calibrate",
            Command::Variant { .. } => "variant",
            Command::Defaults => "defaults",
        }
    }
}

/// Resolves the configuration of an invocation: file, `--set`, then the
/// dedicated flags.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("particles.seed={seed}"));
    }
    if let Command::Variant { kind } = &cli.command {
        overrides.push(format!("problem.kind=\"{}\"", kind.name()));
    }
    let mut cfg = config::load(cli.config.as_deref(), &overrides)?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    cfg.manifest = None;
    Ok(cfg)
}

/// Executes one invocation and returns the text to print.
pub fn run(cli: &Cli) -> CliResult<String> {
    if let Command::Defaults = cli.command {
        return Ok(config::REFERENCE.to_string());
    }
    let cfg = resolve_config(cli)?;
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Config("--threads (or FREEFRONT_THREADS) must be at least 1".into())),
        Some(n) => n,
        None => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} threads: {e}")))?;
    let out = OutDir::create(&cfg.output.dir)?;
    out.write("manifest.toml", &manifest_text(&cfg, &ManifestInfo::new(cli.command.name()))?)?;
    pool.install(|| match &cli.command {
        Command::Solve | Command::Variant { .. } => commands::cmd_solve(&cfg, &out),
        Command::OracleFd { velocity } => commands::cmd_oracle_fd(&cfg, velocity.as_deref(), &out),
        Command::Particles => commands::cmd_particles(&cfg, &out),
        Command::Compare => commands::cmd_compare(&cfg, &out),
        Command::Calibrate => commands::cmd_calibrate(&cfg, &out),
        Command::Defaults => unreachable!("handled above"),
    })
}
