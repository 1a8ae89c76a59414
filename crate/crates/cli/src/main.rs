use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use geonorm_cli::commands::{
    self, BenchArgs, BuildGazetteerArgs, ClusterArgs, EvaluateArgs, ExtractArgs, NormalizeArgs, SequencesArgs,
};
use geonorm_cli::server::{self, AppState};
use geonorm_cli::{GlobalArgs, Settings};
use serde_json::Value;

/// Normalize Chinese text to province / prefecture / county paths.
#[derive(Parser, Debug)]
#[command(name = "geonorm", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a gazetteer and print statistics.
    BuildGazetteer(BuildGazetteerArgs),
    /// Extract geographic sequences from a corpus.
    ExtractSequences(ExtractArgs),
    /// Train skip-gram embeddings on extracted sequences.
    TrainEmbeddings(SequencesArgs),
    /// Mine the ROI knowledge base from extracted sequences.
    BuildRoi(SequencesArgs),
    /// Normalize one text or a JSONL batch.
    Normalize(NormalizeArgs),
    /// Score predictions against gold paths.
    Evaluate(EvaluateArgs),
    /// Measure normalize throughput.
    Bench(BenchArgs),
    /// Run the HTTP service.
    Serve {
        /// Listen address; overrides the config.
        #[arg(long)]
        addr: Option<String>,
    },
    /// Write k-means clusters and a 2-D projection of the embeddings.
    EmitClusterData(ClusterArgs),
}

fn print(v: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn write_or_print(v: &Value, path: Option<&PathBuf>) -> Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, serde_json::to_vec_pretty(v)?)?),
        None => print(v),
    }
}

fn run(cli: Cli) -> Result<()> {
    let settings = Settings::resolve(&cli.global)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers())
        .build_global()?;
    match &cli.command {
        Command::BuildGazetteer(a) => print(&commands::build_gazetteer(&settings, a)?),
        Command::ExtractSequences(a) => print(&commands::extract_sequences(&settings, a)?),
        Command::TrainEmbeddings(a) => print(&commands::train_embeddings(&settings, a)?),
        Command::BuildRoi(a) => print(&commands::build_roi(&settings, a)?),
        Command::Normalize(a) => commands::normalize(&settings, a, &mut io::stdout().lock()),
        Command::Evaluate(a) => print(&commands::evaluate(&settings, a)?),
        Command::Bench(a) => print(&commands::bench(&settings, a)?),
        Command::EmitClusterData(a) => write_or_print(&commands::emit_cluster_data(&settings, a)?, a.output.as_ref()),
        Command::Serve { addr } => {
            let server_config = &settings.config.server;
            let addr = addr.clone().unwrap_or_else(|| server_config.addr.clone());
            let state = AppState::new(settings.engine()?, settings.workers());
            tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()?
                .block_on(server::serve(state, &addr, server_config.max_body_bytes))
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
