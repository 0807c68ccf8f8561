use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cndr::cli::{cmd_bounds, cmd_demo, cmd_predict, cmd_rademacher, cmd_train, cmd_verify};
use cndr::config::RunConfig;
use cndr::data::DataFormat;
use cndr::Result;

#[derive(Parser)]
#[command(
    version,
    about = "Coupled kernel dimensionality reduction: training, bounds and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes model.json and trace.csv to the output directory.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score a data file with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Rows start with a label (ignored).
        #[arg(long)]
        labeled: bool,
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },
    /// Compute the complexity bound, and the margin bound when a model is given.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Monte-Carlo estimate of the empirical Rademacher complexity.
    Rademacher {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the numerical verification suite.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Four-point example: plain rank-1 projection against coupled training.
    Demo {
        #[arg(long, default_value = "demo-out")]
        out: PathBuf,
    },
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { config } => {
            let (_, _, s) = cmd_train(&RunConfig::load(&config)?)?;
            println!(
                "trained in {} rounds ({}); training error {}; model written to {}",
                s.rounds,
                s.stop_reason,
                s.training_error,
                s.model_path.display()
            );
        }
        Command::Predict {
            model,
            data,
            format,
            labeled,
            out,
        } => {
            let format: DataFormat = format.parse()?;
            let scores = cmd_predict(&model, &data, format, labeled, &out)?;
            println!("{} predictions written to {}", scores.len(), out.display());
        }
        Command::Bounds { config, model } => {
            let rep = cmd_bounds(&RunConfig::load(&config)?, model.as_deref())?;
            println!(
                "complexity bound {:.6} (term1 {:.6}, term2 {:.6})",
                rep.total, rep.term1, rep.term2
            );
            if let Some(t) = rep.theorem2 {
                println!("margin bound {:.6} at rho = {}", t.total, t.rho);
            }
            for d in &rep.diagnostics {
                println!("note: {d}");
            }
        }
        Command::Rademacher { config } => {
            let est = cmd_rademacher(&RunConfig::load(&config)?)?;
            println!(
                "rademacher estimate {:.6} +/- {:.2e} ({} draws, {})",
                est.estimate, est.stderr, est.draws, est.sup_method
            );
        }
        Command::Verify { config } => {
            let cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            let report = cmd_verify(&cfg)?;
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            report.into_result()?;
        }
        Command::Demo { out } => {
            let rep = cmd_demo(&out)?;
            println!("plain rank-1 pipeline training error: {}", rep.plain_error);
            println!(
                "coupled pipeline training error: {} (selected {})",
                rep.coupled_error, rep.coupled_index_set
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
