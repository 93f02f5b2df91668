use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use lfa_schwarz_cli::{
    init_threads, run_optimize, run_single, run_table_command, OptimizeConfig, RunConfig,
};
use lfa_schwarz_core::report::{CheckStatus, TableJob};

#[derive(Parser)]
#[command(
    name = "lfa-schwarz",
    about = "Two-grid convergence factors of multigrid with additive Schwarz smoothers: \
             benchmark tables, single analyses, and weight optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce a benchmark table (T1..T8, plus T2D for the 2D
    /// element-block table) and check it against its golden values.
    Table {
        /// T1, T2, T3, T4, T2D, T5, T6, T7 or T8
        id: String,
        /// frequency samples per dimension
        #[arg(long)]
        samples: Option<usize>,
        /// finest solver grid (elements per dimension)
        #[arg(long)]
        grid: Option<i64>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
        /// write the computed table as the new golden instead of comparing
        #[arg(long)]
        write_goldens: bool,
        #[arg(long, default_value = "goldens")]
        goldens_dir: PathBuf,
    },
    /// Run one analysis, solver measurement or oracle self-check from a
    /// JSON config; prints JSON to stdout.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search smoother weights minimizing the predicted factor.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// write the per-frequency profile CSV of the optimum here
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    init_threads();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Table { id, samples, grid, seed, out, format, write_goldens, goldens_dir } => {
            let id = id.parse()?;
            let mut job = TableJob::new(id);
            job.samples = samples;
            job.grid = grid;
            job.seed = seed;
            let outcome = run_table_command(&job, &format, &goldens_dir, write_goldens)?;
            match &out {
                Some(path) => std::fs::write(path, &outcome.rendered)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", outcome.rendered),
            }
            if let Some(cmp) = &outcome.comparison {
                for check in &cmp.checks {
                    match check.status {
                        CheckStatus::Ok => {}
                        CheckStatus::Flagged => eprintln!(
                            "FLAG  [{} / {}]: computed {} vs golden {} (|delta| = {:.3})",
                            check.row,
                            check.col,
                            check.computed.render(),
                            check.golden.render(),
                            check.delta
                        ),
                        CheckStatus::Failed => eprintln!(
                            "FAIL  [{} / {}]: computed {} vs golden {} (|delta| = {:.3})",
                            check.row,
                            check.col,
                            check.computed.render(),
                            check.golden.render(),
                            check.delta
                        ),
                    }
                }
                eprintln!(
                    "table {id}: {} ok, {} flagged, {} failed",
                    cmp.ok, cmp.flagged, cmp.failed
                );
                return Ok(if outcome.passed { 0 } else { 1 });
            }
            Ok(0)
        }
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg = RunConfig::from_json(&text)?;
            let output = run_single(&cfg)?;
            let json = serde_json::to_string_pretty(&output)?;
            match &out {
                Some(path) => std::fs::write(path, &json)?,
                None => println!("{json}"),
            }
            Ok(0)
        }
        Command::Optimize { config, profile, out } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: OptimizeConfig = serde_json::from_str(&text).context("parsing optimize config")?;
            let output = run_optimize(&cfg)?;
            if let Some(path) = &profile {
                std::fs::write(path, output.profile.per_freq_csv())?;
            }
            let json = serde_json::to_string_pretty(&output)?;
            match &out {
                Some(path) => std::fs::write(path, &json)?,
                None => println!("{json}"),
            }
            Ok(0)
        }
    }
}
