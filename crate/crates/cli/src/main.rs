//! `mina` — whataboutism-detection experiments from the command line.
//!
//! Subcommands: ingest, split, kappa, run, ablate, compare-miners, tsne,
//! ortho. Logs go to stderr, artifacts to the output directory. Exit codes:
//! 0 success, 1 runtime failure, 2 invalid configuration or arguments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mina_core::corpus::{
    load_corpus, save_corpus, save_split_assignment, stratified_split, Platform, Split,
};
use mina_core::experiment::{
    cmd_ablate, cmd_compare_miners, cmd_kappa, cmd_run, cmd_tsne, load_config, ExperimentError,
};
use mina_core::ortho::ortho_grid_csv;
use mina_core::tsne::TsneConfig;
use mina_core::util::atomic_write;

#[derive(Parser)]
#[command(
    name = "mina",
    about = "Attention-based negative mining for whataboutism detection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus JSONL file.
    #[arg(long)]
    input: PathBuf,
    /// Corpus platform: standalone | statement_response.
    #[arg(long, value_parser = parse_platform)]
    platform: Platform,
}

fn parse_platform(s: &str) -> Result<Platform, String> {
    match s {
        "standalone" => Ok(Platform::Standalone),
        "statement_response" | "statement-response" => Ok(Platform::StatementResponse),
        other => Err(format!(
            "unknown platform `{other}` (expected standalone | statement_response)"
        )),
    }
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(format!("unknown split `{other}` (expected train | val | test)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus file and write the normalized JSONL.
    Ingest {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Normalized corpus output path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Compute a stratified train/val/test assignment.
    Split {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Comma-separated train,val,test ratios.
        #[arg(long, default_value = "0.80,0.05,0.15")]
        ratios: String,
        #[arg(long)]
        seed: u64,
        /// Split assignment output path (JSONL of {id, split}).
        #[arg(long)]
        output: PathBuf,
    },
    /// Report Fleiss' kappa over the annotator labels.
    Kappa {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Execute the configured method end-to-end.
    Run {
        /// Experiment config (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the ablation grid with repeated sampling seeds.
    Ablate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare mining strategies through the identical pipeline.
    CompareMiners {
        #[arg(long)]
        config: PathBuf,
    },
    /// Project representations to 2-D and write a scatter SVG.
    Tsne {
        #[arg(long)]
        config: PathBuf,
        /// MINA checkpoint; raw embeddings are projected when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Which split to plot.
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: Split,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 400)]
        iterations: usize,
    },
    /// Verify the near-orthogonality tail bound over a (d, epsilon) grid.
    Ortho {
        /// Comma-separated dimensions.
        #[arg(long, default_value = "16,64,256,768")]
        dims: String,
        /// Comma-separated epsilon values.
        #[arg(long, default_value = "0.05,0.1,0.2,0.5")]
        epsilons: String,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_ratios(s: &str) -> anyhow::Result<(f64, f64, f64)> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| anyhow::anyhow!("cannot parse ratios `{s}`: {e}"))?;
    if parts.len() != 3 {
        anyhow::bail!("ratios need exactly 3 comma-separated values, got `{s}`");
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let parts: Result<Vec<T>, _> = s.split(',').map(|p| p.trim().parse::<T>()).collect();
    parts.map_err(|e| anyhow::anyhow!("cannot parse {what} list `{s}`: {e}"))
}

/// Errors with exit-code classification: 2 for configuration problems,
/// 1 for runtime failures.
struct AppError {
    code: u8,
    error: anyhow::Error,
}

impl From<ExperimentError> for AppError {
    fn from(e: ExperimentError) -> Self {
        let code = if e.is_config_error() { 2 } else { 1 };
        AppError {
            code,
            error: anyhow::Error::new(e),
        }
    }
}

impl From<anyhow::Error> for AppError {
    fn from(error: anyhow::Error) -> Self {
        AppError { code: 1, error }
    }
}

fn config_error(error: anyhow::Error) -> AppError {
    AppError { code: 2, error }
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Ingest { corpus, output } => {
            let dataset = load_corpus(&corpus.input, corpus.platform)
                .map_err(|e| config_error(anyhow::Error::new(e)))?;
            save_corpus(&dataset, &output).map_err(|e| AppError {
                code: 1,
                error: anyhow::Error::new(e),
            })?;
            println!(
                "ingested {} comments across {} topics ({} labeled W) -> {}",
                dataset.len(),
                dataset.topics().len(),
                dataset.n_positive(),
                output.display()
            );
            Ok(())
        }
        Command::Split {
            corpus,
            ratios,
            seed,
            output,
        } => {
            let parsed = parse_ratios(&ratios).map_err(config_error)?;
            let dataset = load_corpus(&corpus.input, corpus.platform)
                .map_err(|e| config_error(anyhow::Error::new(e)))?;
            let assignment = stratified_split(&dataset, parsed, seed)
                .map_err(|e| config_error(anyhow::Error::new(e)))?;
            save_split_assignment(&assignment, &output).map_err(|e| AppError {
                code: 1,
                error: anyhow::Error::new(e),
            })?;
            let count = |s: Split| assignment.values().filter(|&&v| v == s).count();
            println!(
                "split {} comments: train {}, val {}, test {} -> {}",
                assignment.len(),
                count(Split::Train),
                count(Split::Val),
                count(Split::Test),
                output.display()
            );
            Ok(())
        }
        Command::Kappa { corpus } => {
            let dataset = load_corpus(&corpus.input, corpus.platform)
                .map_err(|e| config_error(anyhow::Error::new(e)))?;
            let report = cmd_kappa(&dataset)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(())
        }
        Command::Run { config } => {
            let config = load_config(&config)?;
            let artifacts = cmd_run(&config)?;
            println!(
                "W: P {:.4} R {:.4} F1 {:.4} | NW: P {:.4} R {:.4} F1 {:.4} | macro F1 {:.4}",
                artifacts.metrics.w.precision,
                artifacts.metrics.w.recall,
                artifacts.metrics.w.f1,
                artifacts.metrics.nw.precision,
                artifacts.metrics.nw.recall,
                artifacts.metrics.nw.f1,
                artifacts.metrics.macro_f1
            );
            for file in &artifacts.files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
        Command::Ablate { config } => {
            let config = load_config(&config)?;
            let (summaries, _, path) = cmd_ablate(&config)?;
            for s in &summaries {
                println!(
                    "{}: mean F1 {:.4} variance {:.6} over {} runs ({} excluded)",
                    s.config_id, s.mean_f1, s.variance, s.n_runs, s.n_excluded
                );
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::CompareMiners { config } => {
            let config = load_config(&config)?;
            let (rows, path) = cmd_compare_miners(&config)?;
            for row in &rows {
                println!(
                    "{}: mean F1 {:.4} over {} seeds",
                    row.miner,
                    row.mean_f1,
                    row.per_seed_f1.len()
                );
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Tsne {
            config,
            checkpoint,
            split,
            output,
            seed,
            perplexity,
            iterations,
        } => {
            let config = load_config(&config)?;
            let tsne = TsneConfig {
                perplexity,
                iterations,
                seed,
                ..Default::default()
            };
            let (points, labels) =
                cmd_tsne(&config, checkpoint.as_deref(), split, &output, &tsne)?;
            println!(
                "projected {} points ({} W) -> {}",
                points.nrows(),
                labels.iter().filter(|&&l| l == 1).count(),
                output.display()
            );
            Ok(())
        }
        Command::Ortho {
            dims,
            epsilons,
            pairs,
            seed,
            output,
        } => {
            let dims: Vec<usize> = parse_list(&dims, "dimension").map_err(config_error)?;
            let epsilons: Vec<f64> = parse_list(&epsilons, "epsilon").map_err(config_error)?;
            if dims.is_empty() || epsilons.is_empty() {
                return Err(config_error(anyhow::anyhow!(
                    "dims and epsilons must be non-empty"
                )));
            }
            let csv = ortho_grid_csv(&dims, &epsilons, pairs, seed);
            match output {
                Some(path) => {
                    atomic_write(&path, csv.as_bytes()).map_err(|e| AppError {
                        code: 1,
                        error: anyhow::Error::new(e),
                    })?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(app) => {
            eprintln!("error: {:#}", app.error);
            ExitCode::from(app.code)
        }
    }
}
