use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fep_cli::config::{validate_document, ConfigDocument};
use fep_cli::{run, ExperimentKind, RunOptions};

#[derive(Parser)]
#[command(name = "fep", version, about = "Facilitated exclusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the config's `kind` field.
    Run(Common),
    /// Microscopic trajectories with event logs.
    Simulate(Common),
    /// Solve the limiting equation.
    Pde(Common),
    /// Empirical density against the PDE solution.
    HydroCompare(Common),
    /// Hitting times of the ergodic component.
    Transience(Common),
    /// Grand canonical and canonical window tables.
    MeasureTable(Common),
    /// Exact identity checks.
    Verify(Common),
    /// Validate a config and print its normalized form.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all available).
    #[arg(long)]
    threads: Option<usize>,
    /// Outputs depend only on config and seed. Always on; kept for scripts.
    #[arg(long, default_value_t = true)]
    deterministic: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common, check_only) = match cli.command {
        Command::Run(c) => (None, c, false),
        Command::Simulate(c) => (Some(ExperimentKind::Simulate), c, false),
        Command::Pde(c) => (Some(ExperimentKind::Pde), c, false),
        Command::HydroCompare(c) => (Some(ExperimentKind::HydroCompare), c, false),
        Command::Transience(c) => (Some(ExperimentKind::Transience), c, false),
        Command::MeasureTable(c) => (Some(ExperimentKind::MeasureTable), c, false),
        Command::Verify(c) => (Some(ExperimentKind::Verify), c, false),
        Command::Check(c) => (None, c, true),
    };

    let mut doc = match &common.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match serde_json::from_str::<ConfigDocument>(&text) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            },
            Err(e) => {
                eprintln!("error: reading {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => ConfigDocument::default(),
    };
    if common.seed.is_some() {
        doc.master_seed = common.seed;
    }
    if common.out.is_some() {
        doc.output_dir = common.out.clone();
    }
    let config = match validate_document(&doc, kind) {
        Ok(c) => c,
        Err(e) => {
            for f in e.fields() {
                eprintln!("error: {f}");
            }
            if e.fields().is_empty() {
                eprintln!("error: {e}");
            }
            return ExitCode::from(2);
        }
    };
    if check_only {
        println!("{}", config.canonical_json());
        return ExitCode::SUCCESS;
    }

    let opts = RunOptions {
        threads: common.threads,
        deterministic: common.deterministic,
    };
    match run(&config, opts) {
        Ok(outcome) => {
            println!(
                "{} done: {} outputs in {} (config {})",
                outcome.manifest.kind,
                outcome.manifest.outputs.len(),
                config.output_dir.display(),
                &outcome.manifest.config_hash[..12]
            );
            if outcome.checks_passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("some checks failed; see verify.json");
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
