use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manifold_kc::pipeline::{self, CommandOutcome, PipelineError, RunConfig};

#[derive(Parser)]
#[command(name = "manifold-kc", version, about = "Chart atlases, dyadic grids, and Gaussian \
field continuity checks on spheres, tori, and boxes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the chart cover and run sandwich/separability/summability checks.
    Atlas(RunArgs),
    /// Draw nested dyadic-grid samples (requires an atlas in --out).
    Sample(RunArgs),
    /// Run tail, Hölder, chaining, and estimator checks on existing samples.
    Verify(RunArgs),
    /// Pretty-print the reports in an output directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to the config's output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override run.seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override run.threads (0 = library default).
    #[arg(long)]
    threads: Option<usize>,
    /// Override grid levels as k0:k1.
    #[arg(long, value_parser = parse_levels)]
    levels: Option<(u32, u32)>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    out: PathBuf,
}

fn parse_levels(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected k0:k1, got {s:?}"))?;
    let k0 = a.parse().map_err(|e| format!("bad k0: {e}"))?;
    let k1 = b.parse().map_err(|e| format!("bad k1: {e}"))?;
    Ok((k0, k1))
}

fn load_config(args: &RunArgs) -> Result<(RunConfig, PathBuf), PipelineError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(threads) = args.threads {
        cfg.run.threads = threads;
    }
    if let Some((k0, k1)) = args.levels {
        cfg.grid.k0 = k0;
        cfg.grid.k1 = k1;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            PipelineError::Config("no output directory: pass --out or set output.dir".into())
        })?;
    Ok((cfg, out))
}

fn dispatch(
    args: &RunArgs,
    f: impl FnOnce(&RunConfig, &std::path::Path) -> Result<CommandOutcome, PipelineError> + Send,
) -> Result<CommandOutcome, PipelineError> {
    let (cfg, out) = load_config(args)?;
    if cfg.run.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.threads)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        pool.install(|| f(&cfg, &out))
    } else {
        f(&cfg, &out)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Atlas(args) => dispatch(args, pipeline::cmd_atlas),
        Command::Sample(args) => dispatch(args, pipeline::cmd_sample),
        Command::Verify(args) => dispatch(args, pipeline::cmd_verify),
        Command::Report(args) => pipeline::cmd_report(&args.out),
    };
    match &result {
        Ok(outcome) => {
            for line in &outcome.messages {
                println!("{line}");
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(pipeline::exit_code(&result) as u8)
}
