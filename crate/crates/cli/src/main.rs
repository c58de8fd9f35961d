//! `cashtag`: reproducible batch pipelines for homonym cashtag
//! disambiguation. Every command writes its artifacts and a `manifest.json`
//! into `<out>/<command>[-<tag>]/`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cashtag_core::heuristics::FilterMode;
use cashtag_core::models::{ModelKind, Variant};
use cashtag_core::workflow::{self, RunManifest, Step, MANIFEST_FILE, PREDICTIONS_FILE};
use cashtag_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "cashtag", version, about = "Separate company and cryptocurrency tweets that share a cashtag")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Root directory for all outputs.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Suffix for the output directory, to keep several runs of one command.
    #[arg(long)]
    tag: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled synthetic corpus.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Generator spec (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Validate a JSON Lines corpus and keep the valid records.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Fail on the first invalid line instead of skipping it.
        #[arg(long)]
        strict: bool,
    },
    /// Split a corpus into train, tune and test files.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Split spec (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Per-class feature distributions.
    Explore {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run a heuristic filter and write predictions.
    Filter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value = "extended")]
        mode: FilterMode,
        /// Heuristic config (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a classifier.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        tune: Option<PathBuf>,
        #[arg(long, default_value = "combined")]
        variant: Variant,
        /// lr or svm.
        #[arg(long, default_value = "svm")]
        model: ModelKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Training settings (JSON): train, embedding, heuristics.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Apply a trained model and write per-tweet label and score.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Score predictions, or a model, against gold labels; writes report
    /// and ROC points.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "model")]
        predictions: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// McNemar and Cochran's Q over two or more prediction files.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 2.., required = true)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        subset_size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-run a command from its manifest and check the outputs hash the same.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// The first existing output of an earlier command under the same root.
fn earlier(root: &Path, candidates: &[&str], fallback: &str) -> PathBuf {
    candidates
        .iter()
        .map(|c| root.join(c))
        .find(|p| p.exists())
        .unwrap_or_else(|| root.join(fallback))
}

fn corpus_default(root: &Path) -> PathBuf {
    let files = ["ingest/dataset.jsonl", "generate/dataset.jsonl"];
    earlier(root, &files, files[1])
}

fn dir(common: &Common, command: &str) -> PathBuf {
    match &common.tag {
        Some(t) => common.out.join(format!("{command}-{t}")),
        None => common.out.join(command),
    }
}

fn plan(command: Command) -> (Step, PathBuf) {
    match command {
        Command::Generate { common, n, seed, config } => (Step::Generate { n, seed, config }, dir(&common, "generate")),
        Command::Ingest { common, input, strict } => (Step::Ingest { input, strict }, dir(&common, "ingest")),
        Command::Split {
            common,
            input,
            seed,
            config,
        } => (
            Step::Split {
                input: input.unwrap_or_else(|| corpus_default(&common.out)),
                seed,
                config,
            },
            dir(&common, "split"),
        ),
        Command::Explore { common, input } => (
            Step::Explore {
                input: input.unwrap_or_else(|| corpus_default(&common.out)),
            },
            dir(&common, "explore"),
        ),
        Command::Filter {
            common,
            input,
            mode,
            config,
        } => (
            Step::Filter {
                input: input.unwrap_or_else(|| common.out.join("split/test.jsonl")),
                mode,
                config,
            },
            dir(&common, "filter"),
        ),
        Command::Train {
            common,
            train,
            tune,
            variant,
            model,
            seed,
            config,
        } => {
            let tune = tune.or_else(|| Some(common.out.join("split/tune.jsonl")).filter(|p| p.exists()));
            (
                Step::Train {
                    train: train.unwrap_or_else(|| common.out.join("split/train.jsonl")),
                    tune,
                    variant,
                    kind: model,
                    seed,
                    config,
                },
                dir(&common, "train"),
            )
        }
        Command::Classify {
            common,
            model,
            input,
            threshold,
        } => (
            Step::Classify {
                model: model.unwrap_or_else(|| common.out.join("train/model.json")),
                input: input.unwrap_or_else(|| common.out.join("split/test.jsonl")),
                threshold,
            },
            dir(&common, "classify"),
        ),
        Command::Evaluate {
            common,
            predictions,
            model,
            gold,
        } => {
            let (predictions, model) = match (predictions, model) {
                (None, None) => {
                    let found = ["classify", "filter"]
                        .iter()
                        .map(|d| common.out.join(d).join(PREDICTIONS_FILE))
                        .find(|p| p.exists());
                    match found {
                        Some(p) => (Some(p), None),
                        None => (None, Some(common.out.join("train/model.json"))),
                    }
                }
                given => given,
            };
            (
                Step::Evaluate {
                    predictions,
                    model,
                    gold: gold.unwrap_or_else(|| common.out.join("split/test.jsonl")),
                },
                dir(&common, "evaluate"),
            )
        }
        Command::Compare {
            common,
            predictions,
            gold,
            subset_size,
            seed,
        } => (
            Step::Compare {
                predictions,
                gold: gold.unwrap_or_else(|| common.out.join("split/test.jsonl")),
                subset_size,
                seed,
            },
            dir(&common, "compare"),
        ),
        Command::Replay { .. } => unreachable!("replay has no step of its own"),
    }
}

fn execute(cli: Cli) -> Result<(RunManifest, PathBuf), Error> {
    match cli.command {
        Command::Replay { manifest, out } => Ok((workflow::replay(&manifest, &out)?, out)),
        command => {
            let (step, out) = plan(command);
            Ok((workflow::run(&step, &out)?, out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok((manifest, out)) => {
            println!("{}", out.join(MANIFEST_FILE).display());
            for (name, hash) in &manifest.outputs {
                println!("  {name} sha256:{hash}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = serde_json::json!({ "error": e.to_string(), "kind": e.kind() });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
