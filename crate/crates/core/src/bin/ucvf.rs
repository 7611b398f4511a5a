use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ucvf::eval::{generate_synthetic, SynthSpec};
use ucvf::pipeline::{run_pipeline, run_report, RunConfig, Stage};

/// Context x view user feature pipeline over check-in data.
#[derive(Debug, Parser)]
#[command(name = "ucvf", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Compare per-month distributions instead of raw counts.
    #[arg(long, global = true)]
    normalize_monthly: bool,
    /// Gain-ratio selection threshold.
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true, value_parser = ["root", "leaf"])]
    target_view: Option<String>,
    /// Comma-separated K values for Accuracy@K.
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    roots: Option<PathBuf>,
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
    /// Any config key, as `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, annotate and split the check-ins; estimate homes.
    Ingest,
    /// Gain ratio of every context-view pair.
    Influence,
    /// Per-user count matrices.
    Features,
    /// Per-user difference values, ranks and pair assignment.
    Applicability,
    /// Train the unified model.
    Train,
    /// Accuracy@K, RQ1 buckets and RQ2 comparison.
    Evaluate,
    /// Re-render every available report in the chosen format.
    Report,
    /// All stages in order.
    Run,
    /// Write a synthetic cohort with planted regularities and a config for it.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 400)]
    users: usize,
    #[arg(long, default_value_t = 6)]
    months: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

fn config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = &g.out_dir {
        cfg.out_dir = v.clone();
    }
    if g.normalize_monthly {
        cfg.normalize_monthly = true;
    }
    if let Some(v) = g.delta {
        cfg.delta = v;
    }
    for (key, value) in [
        ("target_view", &g.target_view),
        ("k", &g.k),
        ("format", &g.format),
    ] {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    for (field, value) in [
        (&mut cfg.dataset, &g.dataset),
        (&mut cfg.roots, &g.roots),
        (&mut cfg.labels, &g.labels),
    ] {
        if let Some(v) = value {
            *field = v.clone();
        }
    }
    for o in &g.overrides {
        let Some((k, v)) = o.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {o:?}");
        };
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth(cfg: &RunConfig, args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec::planted(args.users, args.months, args.noise, cfg.seed);
    let data = generate_synthetic(&spec)?;
    data.write(&cfg.out_dir)
        .with_context(|| format!("writing {}", cfg.out_dir.display()))?;
    let conf = cfg.out_dir.join("ucvf.conf");
    let text = format!(
        "dataset = checkins.tsv\nroots = leaf_roots.csv\nlabels = leaf_labels.csv\nseed = {}\n",
        cfg.seed
    );
    fs::write(&conf, text).with_context(|| format!("writing {}", conf.display()))?;
    println!(
        "{} users, {} check-ins -> {}",
        data.groups.len(),
        data.checkins.len(),
        cfg.out_dir.display()
    );
    println!("config: {}", conf.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = if cli.global.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let cfg = config(&cli.global)?;
    let stages = match &cli.command {
        Command::Ingest => vec![Stage::Ingest],
        Command::Influence => vec![Stage::Influence],
        Command::Features => vec![Stage::Features],
        Command::Applicability => vec![Stage::Applicability],
        Command::Train => vec![Stage::Train],
        Command::Evaluate => vec![Stage::Evaluate],
        Command::Run => Stage::ALL.to_vec(),
        Command::Report => {
            println!("{}", run_report(&cfg)?.display());
            return Ok(());
        }
        Command::Synth(args) => return synth(&cfg, args),
    };
    for manifest in run_pipeline(&cfg, &stages)? {
        println!("{}", manifest.display());
    }
    Ok(())
}
