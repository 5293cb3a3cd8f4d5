//! `clcons`: generate fields, validate systems and run epsilon sweeps.

mod commands;
mod config;
mod error;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Outcome;
use config::{CommonArgs, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "clcons", version, about = "Commutator and companion-law measurements for conservation laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a system: compatibility, growth, Hölder and derivative checks.
    CheckSystem(CommonArgs),
    /// Write a generated field to a .clf file.
    Generate(CommonArgs),
    /// Measure the configured quantities at one epsilon.
    Analyze(CommonArgs),
    /// Measure the configured quantities over a sequence of epsilons.
    Sweep(CommonArgs),
}

#[cfg(feature = "parallel")]
fn set_jobs(jobs: Option<usize>) -> Result<(), CliError> {
    let Some(j) = jobs else { return Ok(()) };
    if j == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(j)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn set_jobs(jobs: Option<usize>) -> Result<(), CliError> {
    if jobs.is_some() {
        log::warn!("built without the parallel feature; --jobs is ignored");
    }
    Ok(())
}

fn refuse_overwrite(paths: &[PathBuf], force: bool) -> Result<(), CliError> {
    if force {
        return Ok(());
    }
    match paths.iter().find(|p| p.exists()) {
        Some(p) => Err(CliError::Config(format!(
            "refusing to overwrite {} (use --force)",
            p.display()
        ))),
        None => Ok(()),
    }
}

fn csv_path(output: &Path, quantity: &str) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.{quantity}.csv"))
}

fn pretty(report: &serde_json::Value) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

fn write_outputs(cfg: &RunConfig, outcome: &Outcome, force: bool) -> Result<(), CliError> {
    let text = pretty(&outcome.report)?;
    let Some(output) = &cfg.output else {
        print!("{text}");
        return Ok(());
    };
    if let Some(field) = &outcome.field {
        let sidecar = commands::sidecar_path(output);
        refuse_overwrite(&[output.clone(), sidecar.clone()], force)?;
        commands::save_field(field, output)?;
        fs::write(&sidecar, &text)?;
        print!("{text}");
        return Ok(());
    }
    let mut paths = vec![output.clone()];
    paths.extend(outcome.series.iter().map(|r| csv_path(output, &r.quantity_name)));
    refuse_overwrite(&paths, force)?;
    fs::write(output, &text)?;
    for r in &outcome.series {
        let f = fs::File::create(csv_path(output, &r.quantity_name))?;
        r.write_csv(f)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (name, args) = match &cli.command {
        Command::CheckSystem(a) => ("check-system", a),
        Command::Generate(a) => ("generate", a),
        Command::Analyze(a) => ("analyze", a),
        Command::Sweep(a) => ("sweep", a),
    };
    set_jobs(args.jobs)?;
    let cfg = RunConfig::resolve(name, args)?;
    let outcome = match name {
        "check-system" => commands::check_system(&cfg)?,
        "generate" => commands::generate(&cfg)?,
        "analyze" => commands::measure(&cfg, true)?,
        _ => commands::measure(&cfg, false)?,
    };
    write_outputs(&cfg, &outcome, args.force)?;
    if let Some(fails) = outcome.report.get("failures").and_then(|f| f.as_array()) {
        for f in fails {
            eprintln!("clcons: threshold failed: {}", f.as_str().unwrap_or_default());
        }
    }
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("clcons: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
