use clap::{Parser, Subcommand};
use semlink_sim::config::{ConfigError, CorpusSpec, SimConfig};
use semlink_sim::corpus::CorpusGenerator;
use semlink_sim::report;
use semlink_sim::scenario::{ScenarioRunner, SimError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Desk-scale simulator of an intention-aware semantic uplink for AI
/// glasses: edge preprocessing, a latent codec, an OFDM/ESNR channel
/// abstraction, and a closed-loop intention controller.
#[derive(Parser)]
#[command(name = "simulate", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its report CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Write the report CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the per-transmission ledger CSV.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Run the configured sweep and write report + bandwidth summary CSVs.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-transmission ledger CSV.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Generate a synthetic corpus (PNG images + annotations.jsonl).
    Corpus {
        /// Corpus spec JSON file.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), SimError> {
    match cli.command {
        Command::Run { config, out, ledger } => {
            let cfg = SimConfig::from_path(&config)?;
            let runner = ScenarioRunner::new(cfg)?;
            let output = runner.run()?;
            let csv = report::report_csv(&output);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            if let Some(path) = ledger {
                std::fs::write(path, report::ledger_csv(&output))?;
            }
            Ok(())
        }
        Command::Sweep { config, out, ledger } => {
            let cfg = SimConfig::from_path(&config)?;
            let runner = ScenarioRunner::new(cfg)?;
            let output = runner.run()?;
            std::fs::write(&out, report::report_csv(&output))?;
            let summary_path = out.with_extension("summary.csv");
            std::fs::write(summary_path, report::summary_csv(&output))?;
            if let Some(path) = ledger {
                std::fs::write(path, report::ledger_csv(&output))?;
            }
            Ok(())
        }
        Command::Corpus { spec, out } => {
            let text = std::fs::read_to_string(&spec).map_err(ConfigError::Io)?;
            let spec: CorpusSpec = serde_json::from_str(&text).map_err(ConfigError::Parse)?;
            if spec.count == 0 {
                return Err(ConfigError::Invalid("corpus.count must be >= 1".into()).into());
            }
            CorpusGenerator::new(spec).write_to_dir(&out)?;
            Ok(())
        }
    }
}
