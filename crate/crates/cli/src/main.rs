use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conformal_ope::experiment::{oracle_report, parse_cell, run_cell, run_experiment, ExperimentConfig};
use conformal_ope::report::{emit_csv, emit_plots, summary_table};
use conformal_ope::Error;

#[derive(Parser)]
#[command(name = "conformal-ope", version, about = "Conformal off-policy evaluation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid and write results.csv, SVG charts and summary.md.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's out_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Run a single `method:eps:seed` cell and print it as JSON.
        #[arg(long)]
        cell: Option<String>,
        /// 30 seeds and 2000 test points.
        #[arg(long)]
        paper_scale: bool,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print exact return distributions and weights for the configured instance.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    let config = ExperimentConfig::from_file(path)?;
    config.validate()?;
    Ok(config)
}

fn execute(command: Command) -> Result<(), (u8, Error)> {
    let config_err = |e: Error| (1, e);
    let runtime_err = |e: Error| (if e.is_config() { 1 } else { 2 }, e);
    match command {
        Command::Validate { config } => {
            load(&config).map_err(config_err)?;
            println!("ok");
        }
        Command::Oracle { config } => {
            let config = load(&config).map_err(config_err)?;
            let report = oracle_report(&config).map_err(runtime_err)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| runtime_err(e.into()))?);
        }
        Command::Run { config, out_dir, cell, paper_scale } => {
            let mut config = load(&config).map_err(config_err)?;
            if paper_scale {
                config = config.with_paper_scale();
            }
            if let Some(cell) = cell {
                let (method, eps, seed) = parse_cell(&cell).map_err(config_err)?;
                let result = run_cell(&config, method, eps, seed).map_err(runtime_err)?;
                println!("{}", serde_json::to_string_pretty(&result).map_err(|e| runtime_err(e.into()))?);
                return Ok(());
            }
            let out = out_dir.unwrap_or_else(|| config.out_dir.clone());
            let results = run_experiment(&config).map_err(runtime_err)?;
            std::fs::create_dir_all(&out).map_err(|e| (2, e.into()))?;
            emit_csv(&results, &out.join("results.csv")).map_err(runtime_err)?;
            emit_plots(&results, config.alpha, &out).map_err(runtime_err)?;
            let summary = summary_table(&results);
            std::fs::write(out.join("summary.md"), &summary).map_err(|e| (2, e.into()))?;
            print!("{summary}");
            eprintln!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
