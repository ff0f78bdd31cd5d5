use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use weakcorr::error::{Error, Result};
use weakcorr::report;

/// Entanglement certification from velocity fields and momentum weak values.
#[derive(Parser)]
#[command(name = "weakcorr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one state and emit a JSON report.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Directory to write report.json into (report also goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the velocity and weak-correlation fields as CSV.
    Fields {
        #[arg(long)]
        config: PathBuf,
        /// Directory to write the CSV files into.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in state battery through the full identity suite.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sweep one state parameter and tabulate the indicators.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Directory to write sweep.csv into (CSV also goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn apply_thread_limit() -> Result<()> {
    match std::env::var("WEAKCORR_THREADS") {
        Ok(raw) => {
            let n: usize = raw
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| {
                    Error::Usage(format!(
                        "WEAKCORR_THREADS must be a positive integer, got {raw:?}"
                    ))
                })?;
            weakcorr::exec::limit_threads(n);
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Analyze { config, out } => {
            let cfg = report::load_config(&config)?;
            let rep = report::analyze(&cfg)?;
            let text = serde_json::to_string_pretty(&rep)?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("report.json"), &text)?;
            }
            println!("{text}");
            if !rep.identities.all_pass {
                return Err(Error::Invariant(format!(
                    "identity suite failed: {}",
                    rep.identities
                        .failed()
                        .iter()
                        .map(|e| e.name)
                        .collect::<Vec<_>>()
                        .join(", ")
                )));
            }
            Ok(true)
        }
        Command::Fields { config, out } => {
            let cfg = report::load_config(&config)?;
            report::write_fields(&cfg, &out)?;
            println!("wrote fields to {}", out.display());
            Ok(true)
        }
        Command::Verify { config } => {
            let cfg = report::load_config(&config)?;
            let outcome = report::run_verify(&cfg)?;
            for line in &outcome.lines {
                println!(
                    "{} {:<20} class={:<8} identities={}/{} worst={}",
                    if line.pass { "PASS" } else { "FAIL" },
                    line.state,
                    line.class.to_string(),
                    line.identities_passed,
                    line.identities_total,
                    line.worst.as_deref().unwrap_or("-"),
                );
            }
            if !outcome.all_pass {
                return Err(Error::Invariant("verification battery failed".into()));
            }
            Ok(true)
        }
        Command::Sweep { config, out } => {
            let cfg = report::load_config(&config)?;
            let csv = report::run_sweep(&cfg)?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("sweep.csv"), &csv)?;
            }
            print!("{csv}");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(err) = apply_thread_limit() {
        eprintln!("error: {err}");
        return ExitCode::from(err.exit_code() as u8);
    }
    match run(cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
