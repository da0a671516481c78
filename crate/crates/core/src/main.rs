use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vqtts_kit::pipeline::{self, Config, DecodeMode, DecodeOptions, THREADS_ENV};
use vqtts_kit::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "vqtts-kit", version, about = "Prosody features, discrete tokens and decoding for TTS corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the TOML config.
    #[arg(long, global = true, default_value = "config.toml")]
    config: PathBuf,
    /// Overrides the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides both decoding beams.
    #[arg(long, global = true)]
    beam: Option<usize>,
    #[arg(long, global = true)]
    mode: Option<DecodeMode>,
    /// Utterance for export-pitch.
    #[arg(long, global = true)]
    utt: Option<String>,
    /// Output path for export-pitch.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    Extract,
    TrainVq,
    LabelProsody,
    TrainLm,
    Decode,
    Evaluate,
    ExportPitch,
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = Config::load(&cli.config)?;
    match cli.command {
        Command::Extract => {
            let s = pipeline::cmd_extract(&cfg)?;
            println!("extracted {} utterances", s.records);
        }
        Command::TrainVq => {
            let v = pipeline::cmd_train_vq(&cfg, cli.seed)?;
            println!("acoustic vocabulary: {v} tokens");
        }
        Command::LabelProsody => {
            let n = pipeline::cmd_label_prosody(&cfg, cli.seed)?;
            println!("prosody codebook: {n} classes");
        }
        Command::TrainLm => {
            let (pl, vq) = pipeline::cmd_train_lm(&cfg)?;
            println!("step models: prosody {pl} entries, acoustic {vq} entries (with BOS)");
        }
        Command::Decode => {
            let opts = DecodeOptions::from_config(&cfg, cli.mode, cli.beam);
            let hyps = pipeline::cmd_decode(&cfg, opts)?;
            println!("{} hypotheses written", hyps.len());
        }
        Command::Evaluate => {
            let r = pipeline::cmd_evaluate(&cfg)?;
            println!("token accuracy    {:.2}% ({} tokens)", 100.0 * r.token_accuracy, r.n_tokens);
            println!("label accuracy    {:.2}% ({} labels)", 100.0 * r.pl_label_accuracy, r.n_labels);
            println!("gross pitch error {:.2}% ({} voiced frames)", 100.0 * r.gpe, r.n_voiced_frames);
        }
        Command::ExportPitch => {
            let e = pipeline::cmd_export_pitch(&cfg, cli.utt.as_deref(), cli.out.as_deref())?;
            println!("{}: {} hypotheses -> {}", e.utt, e.tracks.len(), display(&e.csv_path));
            if let Some(p) = &e.divergence_path {
                println!("divergence -> {}", display(p));
            }
        }
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = threads_from_env().and_then(|t| pipeline::with_threads(t, || run(&cli)).and_then(|r| r));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
