use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hqc_core::report::run_scenario;
use hqc_core::scenario::{Mode, Scenario};
use hqc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "hqc", version, about = "Holonomic gates and cavity-mediated state transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a gate loop and compare its holonomy with the Stokes angle.
    Gate(Common),
    /// Run one state transfer.
    Transfer(Common),
    /// Fidelity grid over (gamma, kappa).
    Sweep(Common),
    /// Closed-form bounds against simulation.
    Bounds(Common),
    /// Fast invariant self-check.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// CSV output path; defaults to the scenario's `out`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integrator tolerance, overriding the scenario.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Accepted for interface compatibility; every run is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(mode: Mode, c: &Common) -> Result<(Scenario, String)> {
    let (mut s, text) = match &c.scenario {
        Some(path) => Scenario::load(path)?,
        None if mode == Mode::Check => (Scenario::new(Mode::Check), String::new()),
        None => return Err(Error::Scenario("--scenario is required".into())),
    };
    if s.mode != mode {
        return Err(Error::Scenario(format!("scenario mode {:?} does not match the subcommand", s.mode)));
    }
    if c.tol.is_some() {
        s.tol = c.tol;
    }
    s.validate()?;
    Ok((s, text))
}

fn write_output(text: &str, c: &Common, s: &Scenario) -> Result<()> {
    match c.out.as_ref().or(s.out.as_ref()) {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(mode: Mode, c: &Common) -> Result<bool> {
    let (s, text) = load(mode, c)?;
    let r = run_scenario(&s, &text, c.workers)?;
    eprint!("{}", r.log);
    write_output(&r.csv, c, &s)?;
    Ok(r.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match &cli.command {
        Command::Gate(c) => (Mode::Gate, c),
        Command::Transfer(c) => (Mode::Transfer, c),
        Command::Sweep(c) => (Mode::Sweep, c),
        Command::Bounds(c) => (Mode::Bounds, c),
        Command::Check(c) => (Mode::Check, c),
    };
    match run(mode, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
