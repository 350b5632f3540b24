use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use oppa_cli::commands;
use oppa_cli::server::router;
use oppa_core::harness::Variant;
use oppa_core::play::{PlayService, DEFAULT_IDLE};

#[derive(Parser)]
#[command(name = "oppa", about = "Opposite-aware dialogue policy experiments")]
struct Cli {
    /// Experiment config (JSON); defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `out_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Supervised and imitation pretraining only.
    Pretrain {
        #[arg(long, default_value = "oppa", value_parser = parse_variant)]
        variant: Variant,
    },
    /// Pretraining (if configured) followed by RL training.
    Train {
        #[arg(long, default_value = "oppa", value_parser = parse_variant)]
        variant: Variant,
    },
    /// Greedy evaluation of a saved checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train two variants per seed and let them negotiate with each other.
    Crossplay {
        #[arg(long, default_value = "oppa", value_parser = parse_variant)]
        a: Variant,
        #[arg(long, default_value = "dqn", value_parser = parse_variant)]
        b: Variant,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
    },
    /// Every variant under identical seeds.
    Ablate,
    /// Serve negotiation sessions against checkpoints given as NAME=DIR.
    PlayServe {
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<String>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        #[arg(long, default_value_t = DEFAULT_IDLE.as_secs())]
        idle_secs: u64,
        /// Append finished sessions to this JSONL file.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("unknown variant {s}; expected oppa, oppa_no_reg, dqn or reinforce"))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = commands::with_seed(commands::load_config(cli.config.as_deref())?, cli.seed);
    let out = cli.out.as_deref();
    match cli.command {
        Command::Pretrain { variant } => println!("{}", commands::pretrain(&cfg, variant, out)?),
        Command::Train { variant } => println!("{}", commands::train(&cfg, variant, out)?),
        Command::Eval { checkpoint } => println!("{}", commands::eval(&cfg, &checkpoint)?.to_json()),
        Command::Crossplay { a, b, episodes } => println!("{}", commands::crossplay(&cfg, a, b, episodes, out)?),
        Command::Ablate => println!("{}", commands::ablate(&cfg, out)?),
        Command::PlayServe {
            checkpoints,
            addr,
            idle_secs,
            transcripts,
        } => {
            let mut svc = PlayService::new(Duration::from_secs(idle_secs));
            for spec in &checkpoints {
                let (name, dir) = spec.split_once('=').context("checkpoints are given as NAME=DIR")?;
                svc = svc.with_agent(name, commands::load_served(dir.as_ref())?);
            }
            if let Some(p) = transcripts {
                svc = svc.with_transcript_log(p);
            }
            serve(Arc::new(svc), &addr)?;
        }
    }
    Ok(())
}

#[tokio::main]
async fn serve(svc: Arc<PlayService>, addr: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    eprintln!("play service listening on {addr}");
    axum::serve(listener, router(svc)).await?;
    Ok(())
}
