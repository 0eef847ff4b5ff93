//! Command-line front end: runs simulation configs, prints one-shot
//! equilibria, checks them against the brute-force oracle and exports
//! plot series.

pub mod args;
pub mod commands;
pub mod error;
pub mod plot;
pub mod summary;
pub mod trace;

pub use args::{Cli, Command};
pub use error::{CliError, Result};

/// Runs a parsed command, printing JSON results to stdout.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            for a in commands::simulate_configs(&args)? {
                println!("{}", a.dir.display());
            }
        }
        Command::Ne(args) => {
            println!("{}", serde_json::to_string_pretty(&commands::compute_ne(&args)?)?);
        }
        Command::Verify(args) => {
            let report = commands::verify_config(&args)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.ne.passed {
                let who: Vec<String> = report
                    .ne
                    .violations
                    .iter()
                    .map(|v| (v.seller + 1).to_string())
                    .collect();
                return Err(CliError::Verification(format!("sellers {} can gain", who.join(", "))));
            }
        }
        Command::PlotData(args) => {
            let files = commands::plot_data(&args)?;
            println!("{}\n{}", files.reputation.display(), files.price.display());
        }
    }
    Ok(())
}
