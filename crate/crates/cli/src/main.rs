//! `hcmix`: pricing runs, convergence studies, variance surfaces and theory checks.

mod commands;
mod config;
mod error;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcmix::paths::write_path_dump;
use hcmix::{FactorPaths, TimeGrid, ValidatedModel};

use commands::Table;
use config::{resolve_output, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "hcmix", version, about = "Mixed Monte Carlo/PDE pricing under the Heston-CIR model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price one contract with one estimator.
    Price(Common),
    /// Bias and standard error over a schedule of (M, N[, L]).
    ConvergenceStudy(Common),
    /// Measured and predicted variance reduction over a correlation grid.
    VarianceSurface(Common),
    /// Moment, convergence and critical-time conditions as JSON.
    TheoryCheck(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, env = "HCMIX_THREADS")]
    threads: Option<usize>,
    /// Output file; relative paths are placed under HCMIX_OUT_DIR when set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reference price for the bias column.
    #[arg(long)]
    reference: Option<f64>,
    /// Write the simulated factor paths to a binary file.
    #[arg(long, hide = true)]
    dump_paths: Option<PathBuf>,
}

impl Common {
    fn effective_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(threads) = self.threads {
            cfg.threads = threads;
        }
        if let Some(reference) = self.reference {
            cfg.reference = Some(reference);
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        let out_dir = std::env::var_os("HCMIX_OUT_DIR").map(PathBuf::from);
        cfg.output = cfg.output.map(|p| resolve_output(&p, out_dir.as_deref()));
        Ok(cfg)
    }
}

fn dump_paths(path: &Path, cfg: &RunConfig, model: &ValidatedModel) -> Result<(), CliError> {
    let grid = TimeGrid::new(cfg.contract.maturity(), cfg.n)?;
    let out = BufWriter::new(File::create(path)?);
    let paths = (0..cfg.m).map(|i| FactorPaths::simulate(model, &grid, cfg.seed, i as u64));
    write_path_dump(out, &grid, paths)?;
    Ok(())
}

/// Writes the run metadata next to `out` so the run can be repeated.
fn write_metadata(out: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    let mut name = out.as_os_str().to_owned();
    name.push(".config.json");
    let text = serde_json::to_string_pretty(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(PathBuf::from(name), text + "\n")?;
    Ok(())
}

fn emit_table(table: &Table, cfg: &RunConfig) -> Result<(), CliError> {
    table.write(std::io::stdout().lock())?;
    if let Some(out) = &cfg.output {
        table.write(BufWriter::new(File::create(out)?))?;
        write_metadata(out, cfg)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Price(common)
    | Command::ConvergenceStudy(common)
    | Command::VarianceSurface(common)
    | Command::TheoryCheck(common)) = &cli.command;
    let mut cfg = common.effective_config()?;
    let model = cfg.validate()?;
    if let Some(path) = &common.dump_paths {
        dump_paths(path, &cfg, &model)?;
    }
    match cli.command {
        Command::Price(_) => emit_table(&commands::price(&cfg, &model)?, &cfg),
        Command::ConvergenceStudy(_) => {
            let (table, reference) = commands::convergence_study(&cfg, &model)?;
            cfg.reference = Some(reference);
            emit_table(&table, &cfg)
        }
        Command::VarianceSurface(_) => emit_table(&commands::variance_surface(&cfg)?, &cfg),
        Command::TheoryCheck(_) => {
            let json = commands::theory_check(&cfg, &model)?;
            writeln!(std::io::stdout().lock(), "{json}")?;
            if let Some(out) = &cfg.output {
                let mut f = File::create(out)?;
                writeln!(f, "{json}")?;
                write_metadata(out, &cfg)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
