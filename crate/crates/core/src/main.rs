use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rhox::harness::{
    aggregate_dir, run_experiment, run_grid, write_aggregate, write_grid, ConfigEntries, Grid,
    GridCell, HarnessError,
};

#[derive(Parser)]
#[command(
    name = "rhox",
    version,
    about = "Neighboring-state exploration experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration over its seeds and write one CSV per seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config entry, e.g. `--set rho.n=20`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory; overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep a grid of overrides and write per-run CSVs plus summary.csv.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average the run CSVs in a directory per cell.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config: &Path, sets: &[String]) -> Result<ConfigEntries, HarnessError> {
    let mut entries = ConfigEntries::load(config)?;
    for pair in sets {
        entries.set_pair(pair)?;
    }
    Ok(entries)
}

fn report(cells: &[GridCell]) {
    for cell in cells {
        let s = cell.summary();
        let label = if s.label.is_empty() { "base" } else { &s.label };
        println!(
            "{}  {label}  final eval {:.3} +- {:.3} over {} seeds",
            s.cell, s.final_eval_mean, s.final_eval_std, s.n_seeds
        );
    }
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run { config, set, out } => {
            let mut entries = load(&config, &set)?;
            if let Some(out) = out {
                entries.set("out_dir", &out.display().to_string())?;
            }
            let cfg = entries.build()?;
            let logs = run_experiment(&cfg)?;
            let cell = GridCell {
                overrides: Vec::new(),
                config: cfg,
                logs,
            };
            write_grid(&cell.config.out_dir, std::slice::from_ref(&cell))?;
            report(std::slice::from_ref(&cell));
        }
        Command::Grid { config, grid, out } => {
            let entries = load(&config, &[])?;
            let grid = Grid::load(&grid)?;
            let cells = run_grid(&entries, &grid)?;
            write_grid(&out, &cells)?;
            report(&cells);
        }
        Command::Aggregate { input, out } => {
            let curves = aggregate_dir(&input)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            write_aggregate(std::fs::File::create(&out)?, &curves)?;
            println!("aggregated {} cells into {}", curves.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
