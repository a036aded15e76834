//! Command-line surface: `train`, `embed`, `rank`, `eval`, `ablate`, `synth`.
//!
//! Exit status is 0 on success, 2 for usage problems (bad flags, missing
//! input files, invalid configuration) and 1 for failures while running.
//! Errors are reported as one line on standard error.

use std::collections::HashSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{generate_synthetic, SyntheticSpec};
use crate::data::{load_annotations_for_ids, load_catalog, write_annotations, write_catalog};
use crate::encoder::Checkpoint;
use crate::evaluation::{compare_variants, evaluate, write_variants, Rankings};
use crate::inference::{embed_catalog, load_embeddings, rank, rank_all, write_embeddings, write_rankings};
use crate::trainer::{train, LossVariant, TrainConfig};
use crate::util::read_to_string;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "textmetric", version, about = "Metric-learned text embeddings for catalog similarity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an encoder and write a checkpoint plus `<out>.metrics.csv`.
    Train(TrainArgs),
    /// Embed every catalog item with a trained checkpoint.
    Embed(EmbedArgs),
    /// Rank the catalog for one source or for every item.
    Rank(RankArgs),
    /// Score rankings against annotations; prints one CSV row.
    Eval(EvalArgs),
    /// Train and evaluate every loss variant with one base config.
    Ablate(AblateArgs),
    /// Generate a clustered synthetic catalog and its annotations.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML training config; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("which").required(true).args(["source", "all"])))]
pub struct RankArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub rankings: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "10,100")]
    pub k: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML generator spec; defaults apply to missing keys.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out_data: PathBuf,
    #[arg(long)]
    pub out_annotations: PathBuf,
}

/// Path of the per-step loss CSV written next to a checkpoint.
pub fn metrics_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".metrics.csv");
    PathBuf::from(name)
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::load(p),
        None => Ok(TrainConfig::default()),
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Executes one command, writing human output to `stdout`.
pub fn execute(command: Command, stdout: &mut dyn Write) -> Result<()> {
    let out_err = |e: std::io::Error| Error::io("<stdout>", e);
    match command {
        Command::Train(a) => {
            let mut config = load_config(a.config.as_deref())?;
            if let Some(seed) = a.seed {
                config.seed = seed;
            }
            config.validate()?;
            let items = load_catalog(&a.data)?;
            let report = train(&items, &config)?;
            report.checkpoint.save(&a.out)?;
            report.write_metrics(&metrics_path(&a.out))?;
            if report.truncated_texts > 0 {
                eprintln!("warning: {} texts truncated to {} tokens", report.truncated_texts, config.max_seq_len);
            }
        }
        Command::Embed(a) => {
            let checkpoint = Checkpoint::load(&a.checkpoint)?;
            let items = load_catalog(&a.data)?;
            let embedded = embed_catalog(&items, &checkpoint)?;
            if embedded.truncated > 0 {
                eprintln!("warning: {} texts truncated", embedded.truncated);
            }
            write_embeddings(&a.out, &embedded.items, checkpoint.encoder.config().seed)?;
        }
        Command::Rank(a) => {
            let embeddings = load_embeddings(&a.embeddings)?;
            let rankings = match &a.source {
                Some(source) => vec![rank(source, &embeddings)?],
                None => rank_all(&embeddings)?,
            };
            write_rankings(&a.out, &rankings)?;
        }
        Command::Eval(a) => {
            let rankings = Rankings::load_csv(&a.rankings)?;
            let ids = rankings.ids();
            let annotations = load_annotations_for_ids(&a.annotations, &ids)?;
            let report = evaluate(&rankings, &annotations, &a.k)?;
            stdout.write_all(report.to_csv().as_bytes()).map_err(out_err)?;
        }
        Command::Ablate(a) => {
            let base = load_config(a.config.as_deref())?;
            let items = load_catalog(&a.data)?;
            let ids: HashSet<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
            let annotations = load_annotations_for_ids(&a.annotations, &ids)?;
            let configs: Vec<TrainConfig> = LossVariant::ALL
                .iter()
                .map(|&loss_variant| TrainConfig {
                    loss_variant,
                    ..base.clone()
                })
                .collect();
            let rows = compare_variants(&items, &annotations, &configs);
            for row in &rows {
                if let Err(e) = &row.result {
                    eprintln!("warning: variant {} failed: {}", row.variant, one_line(&e.to_string()));
                }
            }
            write_variants(&a.out, &rows)?;
        }
        Command::Synth(a) => {
            let spec = match &a.spec {
                Some(p) => toml::from_str::<SyntheticSpec>(&read_to_string(p)?)
                    .map_err(|e| Error::Config(e.to_string()))?,
                None => SyntheticSpec::default(),
            };
            spec.validate()?;
            let corpus = generate_synthetic(&spec)?;
            write_catalog(&a.out_data, &corpus.items)?;
            write_annotations(&a.out_annotations, &corpus.annotations)?;
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            eprintln!("{}", one_line(&first));
            return EXIT_USAGE;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            exit_code(&e)
        }
    }
}
