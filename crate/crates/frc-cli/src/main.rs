//! `frc` — fuzzy reasoning chain runner.
//!
//! Subcommands: `analyze` (run a method over a text or dataset), `perturb`
//! (generate robustness/monotonicity sets), `evaluate` (RS/MS/F1 comparison
//! report), `transfer` (the four knowledge-injection configurations).
//!
//! Exit codes: 0 full success, 1 configuration or I/O errors, 2 partial
//! failures (failed records are logged and the run continues).

use clap::{Parser, Subcommand};
use frc::commands::{self, BackendKind, Method, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "frc", version, about = "Fuzzy reasoning chains for sentiment analysis")]
struct Cli {
    /// TOML run configuration; flags below override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Backend kind: http or lexicon
    #[arg(long, global = true)]
    backend: Option<BackendKind>,

    /// Reasoning method: frc, cot, or dp
    #[arg(long, global = true)]
    method: Option<Method>,

    /// Output directory for traces, reports, and config snapshots
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for deterministic generators
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Ambiguity threshold for the clear/ambiguous split
    #[arg(long, global = true)]
    threshold: Option<f64>,

    /// Lexicon file for the lexicon backend
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,

    /// Input dataset (JSONL with id/text/label/lang)
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,

    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run the configured method, writing one trace (or label) per record
    Analyze {
        /// Analyze a single text instead of a dataset
        #[arg(long)]
        text: Option<String>,
    },
    /// Generate perturbed datasets for robustness/monotonicity evaluation
    Perturb {
        /// Perturbation kinds (robust_low, robust_medium, robust_high, monotonic)
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<String>,
        /// Synonym table for the deterministic generator
        #[arg(long)]
        synonyms: Option<PathBuf>,
    },
    /// Compute RS/MS/F1 and emit the comparison report
    Evaluate {
        /// Methods to compare (default: the configured method)
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        /// Perturbed records produced by `frc perturb`
        #[arg(long)]
        perturbed: Option<PathBuf>,
    },
    /// Run the four knowledge-injection configurations and report F1 each
    Transfer {
        /// Teacher traces (JSONL of fuzzy-chain traces)
        #[arg(long)]
        teacher_traces: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, commands::CommandError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(kind) = cli.backend {
        config.backend.kind = kind;
    }
    if let Some(method) = cli.method {
        config.run.method = method;
    }
    if let Some(out) = &cli.out {
        config.run.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(threshold) = cli.threshold {
        config.run.ambiguity_threshold = threshold;
    }
    if let Some(lexicon) = &cli.lexicon {
        config.backend.lexicon_path = Some(lexicon.clone());
    }
    if let Some(dataset) = &cli.dataset {
        config.data.dataset = Some(dataset.clone());
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<u8, anyhow::Error> {
    let mut config = load_config(&cli)?;
    match &cli.command {
        Commands::Analyze { text } => {
            config.validate()?;
            let summary = commands::analyze(&config, text.as_deref())?;
            for failure in &summary.failures {
                eprintln!("failed {}: {}", failure.id, failure.error);
            }
            println!(
                "analyzed {}/{} records with {} ({})",
                summary.succeeded,
                summary.total,
                config.run.method,
                config.run.out_dir.display()
            );
            Ok(if summary.failures.is_empty() { 0 } else { 2 })
        }
        Commands::Perturb { kinds, synonyms } => {
            if !kinds.is_empty() {
                config.perturb.kinds = kinds.clone();
            }
            if let Some(synonyms) = synonyms {
                config.perturb.synonyms_path = Some(synonyms.clone());
            }
            config.validate()?;
            let summary = commands::perturb(&config)?;
            for failure in &summary.failures {
                eprintln!("failed {}: {}", failure.id, failure.error);
            }
            println!(
                "perturbed {} records into {} ({} skipped) -> {}",
                summary.records_in,
                summary.records_out,
                summary.skipped,
                summary.output.display()
            );
            Ok(if summary.failures.is_empty() { 0 } else { 2 })
        }
        Commands::Evaluate { methods, perturbed } => {
            if let Some(perturbed) = perturbed {
                config.data.perturbed = Some(perturbed.clone());
            }
            config.validate()?;
            let methods = if methods.is_empty() {
                vec![config.run.method]
            } else {
                methods.clone()
            };
            let outcome = commands::evaluate(&config, &methods)?;
            for failure in &outcome.failures {
                eprintln!("failed {}: {}", failure.id, failure.error);
            }
            print!("{}", outcome.report.render_table());
            println!("report written to {}", outcome.report_path.display());
            Ok(if outcome.failures.is_empty() { 0 } else { 2 })
        }
        Commands::Transfer { teacher_traces } => {
            if let Some(path) = teacher_traces {
                config.data.teacher_traces = Some(path.clone());
            }
            config.validate()?;
            let report = commands::transfer(&config)?;
            for warning in &report.warnings {
                eprintln!("warning: {warning}");
            }
            print!("{}", report.render_table());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
