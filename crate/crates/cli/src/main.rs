//! `nlcomp`: command-line front end of the competition-model laboratory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlcomp_core::runner::{
    classify_json, eigen_curve_text, ode_csv, run_scenario, sweep, validate_kernels_json, RunnerError, ScenarioConfig,
    EXIT_IO,
};

#[derive(Parser)]
#[command(name = "nlcomp", version, about = "Nonlocal competition model with free boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set params.mu=0.5` (repeatable).
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent sweep cells.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Suppress progress and summary output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate both kernels and print their summary.
    ValidateKernel(Common),
    /// Principal eigenvalue against interval length.
    EigenCurve(Common),
    /// Equilibria, F(s) classification and attractor bounds.
    Classify(Common),
    /// Integrate the spatially homogeneous system.
    Ode(Common),
    /// Run a scenario and write its outputs.
    Simulate(Common),
    /// Run a scenario with the theorem checks enabled.
    Verify(Common),
    /// Cartesian sweep over `[[sweep.axes]]`.
    Sweep(Common),
}

fn load(common: &Common) -> Result<ScenarioConfig, RunnerError> {
    let base = match &common.config {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    let mut cfg = base.with_overrides(&common.set)?;
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

fn write(path: &Path, contents: &str) -> Result<(), RunnerError> {
    let io = |e: std::io::Error| RunnerError::Io { path: path.to_path_buf(), reason: e.to_string() };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, contents).map_err(io)
}

/// Data commands print to stdout unless `--out` is given.
fn emit(common: &Common, file: &str, contents: &str) -> Result<i32, RunnerError> {
    match &common.out {
        Some(dir) => {
            let path = dir.join(file);
            write(&path, contents)?;
            if !common.quiet {
                eprintln!("wrote {}", path.display());
            }
        }
        None => print!("{contents}"),
    }
    Ok(0)
}

fn simulate(common: &Common, force_verify: bool) -> Result<i32, RunnerError> {
    let mut cfg = load(common)?;
    if force_verify {
        cfg.diagnostics.verify = true;
    }
    let (outcome, files) = run_scenario(&cfg)?;
    if !common.quiet {
        let r = &outcome.report;
        println!(
            "regime = {}; fronts = [{:.6}, {:.6}]; files = {} in {}",
            r.regime,
            r.fronts.final_g,
            r.fronts.final_h,
            files.len(),
            cfg.output.dir.display()
        );
        for check in &r.theorem_checks {
            println!("  [{}] {} (margin {:.3e})", if check.pass { "pass" } else { "FAIL" }, check.name, check.margin);
        }
    }
    Ok(outcome.exit_code)
}

fn run_sweep(common: &Common) -> Result<i32, RunnerError> {
    let cfg = load(common)?;
    let jobs = common.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let table = sweep(&cfg, jobs)?;
    let path = cfg.output.dir.join("sweep.csv");
    write(&path, &table.to_csv())?;
    if !common.quiet {
        for row in &table.rows {
            println!("cell {:>4}: {} {}", row.cell, row.regime.as_deref().unwrap_or("-"), row.status);
        }
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn dispatch(command: &Command) -> Result<i32, RunnerError> {
    match command {
        Command::ValidateKernel(c) => emit(c, "kernels.json", &validate_kernels_json(&load(c)?)?),
        Command::EigenCurve(c) => emit(c, "eigen_curve.txt", &eigen_curve_text(&load(c)?)?),
        Command::Classify(c) => emit(c, "classify.json", &classify_json(&load(c)?)?),
        Command::Ode(c) => emit(c, "ode.csv", &ode_csv(&load(c)?)?),
        Command::Simulate(c) => simulate(c, false),
        Command::Verify(c) => simulate(c, true),
        Command::Sweep(c) => run_sweep(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_IO as u8))
}
