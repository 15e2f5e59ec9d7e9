use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use gfm_cli::{parse_override, run_command, Command, PipelineConfig};

#[derive(Parser)]
#[command(name = "gfm", version, about = "Graph foundation embeddings for personalization")]
struct Cli {
    /// Flat `key = value` config file with dotted sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed of every component.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 1 is the deterministic reference mode.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Overrides `paths.workdir`.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,

    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", global = true, value_parser = parse_override)]
    set: Vec<(String, String)>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Writes a synthetic catalog and interaction log.
    GenData,
    /// Builds the co-interaction graph from the training window.
    BuildGraph,
    /// Trains the graph encoder and exports the embedding store.
    TrainHgnn,
    /// Trains the two-tower model.
    #[command(name = "train-2t")]
    Train2t,
    /// Hit-Rate@K on the held-out window.
    Evaluate,
    /// Trains and evaluates the ablation variants.
    Ablate,
    /// Top-k items per type for one user.
    Recommend {
        #[arg(long)]
        user: u64,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut overrides = cli.set;
    if let Some(seed) = cli.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(dir) = cli.workdir {
        let dir = dir.display().to_string();
        overrides.push(("paths.workdir".into(), dir.clone()));
        overrides.push(("paths.catalog".into(), format!("{dir}/catalog.tsv")));
        overrides.push(("paths.interactions".into(), format!("{dir}/interactions.tsv")));
    }
    let cfg = PipelineConfig::load(cli.config.as_deref(), &overrides).context("loading configuration")?;
    let command = match cli.command {
        Cmd::GenData => Command::GenData,
        Cmd::BuildGraph => Command::BuildGraph,
        Cmd::TrainHgnn => Command::TrainHgnn,
        Cmd::Train2t => Command::Train2t,
        Cmd::Evaluate => Command::Evaluate,
        Cmd::Ablate => Command::Ablate,
        Cmd::Recommend { user, k } => Command::Recommend { user, k },
    };
    let outcome = run_command(&command, &cfg, cli.threads).with_context(|| format!("`{}` failed", command.name()))?;
    print!("{}", outcome.summary);
    eprintln!("manifest: {}", outcome.manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
