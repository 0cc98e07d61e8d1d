//! `ncac`: reproducible Φ, PCI, simulation and adaptation runs from a JSON config.

mod commands;
mod config;
mod error;
mod load;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use commands::Outcome;
use config::ExperimentConfig;
use error::{json_error, CliError, CliResult};
use run::Run;

#[derive(Parser)]
#[command(name = "ncac", version, about = "Integrated information and perturbational complexity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a spiking network and write its raster, binary states and weights
    Simulate(Args),
    /// Φ at one state and/or Φ̄ over states
    Phi(Args),
    /// Perturbational complexity, optionally with a coupled-versus-pruned ordering
    Pci(Args),
    /// Tune weights toward a Φ target; exits 4 when the target is not met
    Adapt(Args),
    /// Consolidate earlier run directories into one JSON and one CSV
    Report(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Experiment config (JSON); relative paths inside it resolve against its directory
    #[arg(long)]
    config: PathBuf,
    /// Run seed, overriding the config's `seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config's `out_dir`
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("NCAC_THREADS") else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Input(format!("NCAC_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

fn missing(block: &str) -> CliError {
    CliError::Input(format!("config has no `{block}` block"))
}

fn execute(command: Command) -> CliResult<Outcome> {
    let (name, args) = match command {
        Command::Simulate(a) => ("simulate", a),
        Command::Phi(a) => ("phi", a),
        Command::Pci(a) => ("pci", a),
        Command::Adapt(a) => ("adapt", a),
        Command::Report(a) => ("report", a),
    };
    configure_threads()?;
    let config_path = args.config.as_path();
    let shown = config_path.display().to_string();
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", config_path.display())))?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| json_error(&shown, &e))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| json_error(&shown, &e))?;
    let config_dir = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let out_dir = match (&args.out, &cfg.out_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => config_dir.join(o),
        (None, None) => config_dir.join("out").join(name),
    };
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let mut run = Run::new(name, seed, config_dir, out_dir, &raw)?;
    let outcome = match name {
        "simulate" => commands::simulate(&mut run, cfg.simulate.as_ref().ok_or_else(|| missing("simulate"))?),
        "phi" => commands::phi(&mut run, cfg.phi.as_ref().ok_or_else(|| missing("phi"))?),
        "pci" => commands::pci_cmd(&mut run, cfg.pci.as_ref().ok_or_else(|| missing("pci"))?),
        "adapt" => commands::adapt_cmd(&mut run, cfg.adapt.as_ref().ok_or_else(|| missing("adapt"))?),
        _ => commands::report(&mut run, cfg.report.as_ref().ok_or_else(|| missing("report"))?),
    }?;
    run.finish()?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("adaptation did not reach the target; trace written");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
