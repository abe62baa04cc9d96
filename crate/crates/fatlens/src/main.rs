use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fatlens::error::exit;
use fatlens::{stages, CliError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "fatlens", version, about = "Measure physician fatigue from clinical note text")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Override any config key, e.g. `--set lm.order=4`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate and clean a JSONL or CSV corpus.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        /// auto, jsonl or csv.
        #[arg(long)]
        format: Option<String>,
        #[arg(long, value_name = "PATH")]
        complaint_vocabulary: Option<PathBuf>,
    },
    /// Reconstruct shifts from note timestamps.
    Segment {
        #[arg(long)]
        max_gap_minutes: Option<i64>,
    },
    /// Label shifts by prior-week workload.
    Label,
    /// Build the complaint-balanced dataset and patient split.
    BuildDataset {
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Compute the feature vector of every note.
    ExtractFeatures {
        /// CSV of note_id,log2_perplexity from an external model.
        #[arg(long, value_name = "PATH")]
        perplexity: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        lexicon: Option<PathBuf>,
    },
    /// Train the n-gram model on training notes.
    TrainLm {
        #[arg(long)]
        order: Option<usize>,
    },
    /// Fit the logistic classifier with cross-validated λ.
    Train,
    /// Held-out AUC, accuracy and F1.
    Evaluate {
        #[arg(long)]
        bootstrap_replicates: Option<usize>,
    },
    /// Standardized fatigue score for every note.
    Score {
        /// heldout, train or all.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Regress fatigue measures on the score.
    Validate {
        /// measure_on_fatigue or fatigue_on_measure.
        #[arg(long)]
        orientation: Option<String>,
        /// heldout, train or all.
        #[arg(long)]
        notes: Option<String>,
    },
    /// Yield of testing against workload and the score.
    Yield {
        #[arg(long)]
        notes: Option<String>,
    },
    /// Score differences by patient demographics.
    Disparity {
        #[arg(long)]
        notes: Option<String>,
    },
    /// Feature correlations with high workload.
    Correlations,
    /// Simulate a corpus with known fatigue.
    Simulate {
        /// text or linear.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        contrast: Option<f64>,
    },
    /// Check least squares against the closed-form shrinkage.
    Shrinkage {
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Rejection rates of outcome regressions on Y and Ŷ.
    Attenuation {
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Score n-gram generated HPI sections against the originals.
    GenerateCompare {
        #[arg(long)]
        max_notes: Option<usize>,
    },
    /// Pairwise fatigue judgments from a chat-completion endpoint.
    LlmBaseline {
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Assemble tables and the arrival-time figure.
    Report,
    /// Rerun a stage from its manifest and compare artifact digests.
    Replay { manifest: PathBuf },
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn path(p: &std::path::Path) -> String {
    quoted(&p.to_string_lossy())
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Segment { .. } => "segment",
            Command::Label => "label",
            Command::BuildDataset { .. } => "build-dataset",
            Command::ExtractFeatures { .. } => "extract-features",
            Command::TrainLm { .. } => "train-lm",
            Command::Train => "train",
            Command::Evaluate { .. } => "evaluate",
            Command::Score { .. } => "score",
            Command::Validate { .. } => "validate",
            Command::Yield { .. } => "yield",
            Command::Disparity { .. } => "disparity",
            Command::Correlations => "correlations",
            Command::Simulate { .. } => "simulate",
            Command::Shrinkage { .. } => "shrinkage",
            Command::Attenuation { .. } => "attenuation",
            Command::GenerateCompare { .. } => "generate-compare",
            Command::LlmBaseline { .. } => "llm-baseline",
            Command::Report => "report",
            Command::Replay { .. } => "replay",
        }
    }

    /// Stage flags as config overrides, so the manifest records them.
    fn overrides(&self) -> Vec<String> {
        let mut o = Vec::new();
        let mut set = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push(format!("{key}={v}"));
            }
        };
        match self {
            Command::Ingest { input, format, complaint_vocabulary } => {
                set("ingest.input", input.as_deref().map(path));
                set("ingest.format", format.as_deref().map(quoted));
                set("ingest.complaint_vocabulary", complaint_vocabulary.as_deref().map(path));
            }
            Command::Segment { max_gap_minutes } => set("segment.max_gap_minutes", max_gap_minutes.map(|v| v.to_string())),
            Command::BuildDataset { train_fraction } => {
                set("dataset.train_fraction", train_fraction.map(|v| format!("{v:?}")))
            }
            Command::ExtractFeatures { perplexity, lexicon } => {
                set("features.perplexity_file", perplexity.as_deref().map(path));
                set("features.lexicon", lexicon.as_deref().map(path));
            }
            Command::TrainLm { order } => set("lm.order", order.map(|v| v.to_string())),
            Command::Evaluate { bootstrap_replicates } => {
                set("evaluate.bootstrap_replicates", bootstrap_replicates.map(|v| v.to_string()))
            }
            Command::Score { reference } => set("analysis.reference", reference.as_deref().map(quoted)),
            Command::Validate { orientation, notes } => {
                set("analysis.orientation", orientation.as_deref().map(quoted));
                set("analysis.notes", notes.as_deref().map(quoted));
            }
            Command::Yield { notes } | Command::Disparity { notes } => {
                set("analysis.notes", notes.as_deref().map(quoted))
            }
            Command::Simulate { kind, contrast } => {
                set("simulate.kind", kind.as_deref().map(quoted));
                set("simulate.contrast", contrast.map(|v| format!("{v:?}")));
            }
            Command::Shrinkage { replicates } => set("shrinkage.replicates", replicates.map(|v| v.to_string())),
            Command::Attenuation { replicates } => set("attenuation.replicates", replicates.map(|v| v.to_string())),
            Command::GenerateCompare { max_notes } => set("generation.max_notes", max_notes.map(|v| v.to_string())),
            Command::LlmBaseline { endpoint, model, pairs } => {
                set("llm.endpoint", endpoint.as_deref().map(quoted));
                set("llm.model", model.as_deref().map(quoted));
                set("llm.pairs", pairs.map(|v| v.to_string()));
            }
            Command::Label | Command::Train | Command::Correlations | Command::Report | Command::Replay { .. } => {}
        }
        o
    }
}

fn run(cli: Cli, argv: &[String]) -> Result<Vec<String>, CliError> {
    if let Command::Replay { manifest } = &cli.command {
        return stages::replay(manifest, argv);
    }
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(dir) = &cli.out_dir {
        overrides.push(format!("out_dir={}", path(dir)));
    }
    overrides.extend(cli.command.overrides());
    let mut config = RunConfig::load(cli.config.as_deref(), std::env::vars(), &overrides)?;
    config.absolutize()?;
    let (out, _) = stages::run_stage(cli.command.name(), &config, argv)?;
    Ok(out)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::OK });
        }
    };
    match run(cli, &argv) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::from(exit::OK)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
