//! Thin command-line front end: parse flags, load the configuration, apply
//! overrides, and hand off to the pipeline runner. All behavior lives in the
//! library; see the crate examples for the same flows driven directly.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use malgraph::pipeline::{load_run_config, run_command, Command, Overrides};
use malgraph::zeroshot::ClassifyMode;
use malgraph::Error;

#[derive(Debug, Parser)]
#[command(
    name = "malgraph",
    version,
    about = "Zero-shot Android malware detection over sensitive-API call graphs"
)]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Classification mode: zero-shot or few-shot.
    #[arg(long, global = true, value_name = "MODE")]
    mode: Option<ClassifyMode>,

    /// Decision threshold, overriding the configuration.
    #[arg(long, global = true, value_name = "X")]
    threshold: Option<f64>,

    /// Float width, 32 or 64.
    #[arg(long, global = true, value_name = "BITS")]
    float: Option<u32>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus, manifest, and vocabulary files.
    Synth,
    /// Derive a train/test/support split from the manifest.
    Split,
    /// Build sensitive-API call graphs from the corpus.
    BuildGraphs,
    /// Train the variational graph auto-encoder on the training split.
    TrainVgae,
    /// Embed every graph with the trained VGAE.
    Embed,
    /// Train the Siamese similarity network on training embeddings.
    TrainSnn,
    /// Classify the test split against the support set.
    Classify,
    /// Score stored verdicts against the manifest.
    Evaluate,
    /// Re-apply the decision rule across a threshold grid.
    Sweep,
}

impl From<Cmd> for Command {
    fn from(cmd: Cmd) -> Command {
        match cmd {
            Cmd::Synth => Command::Synth,
            Cmd::Split => Command::Split,
            Cmd::BuildGraphs => Command::BuildGraphs,
            Cmd::TrainVgae => Command::TrainVgae,
            Cmd::Embed => Command::Embed,
            Cmd::TrainSnn => Command::TrainSnn,
            Cmd::Classify => Command::Classify,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Sweep => Command::Sweep,
        }
    }
}

fn run(cli: Cli) -> malgraph::Result<()> {
    let config_path = cli
        .config
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut config = load_run_config(&config_path)?;
    config.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        mode: cli.mode,
        threshold: cli.threshold,
        float: cli.float,
    });
    run_command(cli.command.into(), &config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
