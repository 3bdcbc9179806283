//! `poro` command line: `run <config> [--out DIR]`, `verify [--filter NAME]`, `report <csv>`.
//!
//! Exit codes: 0 on success, 1 on any run/verification failure, 2 on usage
//! errors (bad arguments, missing config file, invalid `PORO_THREADS`).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::coupling::run_transient;
use crate::error::Result;
use crate::io::{parse_csv, render_reports, render_steps, render_summary, write_vtk, RunConfig};
use crate::par::{configure_threads, ExecPolicy};
use crate::verify;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "poro", version, about = "Fixed-stress split poromechanics with contraction monitoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a transient simulation from a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `[output] directory`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in property suites.
    Verify {
        /// Only run suites whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Summarise a contraction report CSV.
    Report { csv: PathBuf },
}

/// Entry point; returns the process exit code.
pub fn main_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    if let Ok(v) = std::env::var("PORO_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                configure_threads(n);
            }
            _ => {
                let _ = writeln!(stderr, "error: PORO_THREADS must be a positive integer, got `{v}`");
                return EXIT_USAGE;
            }
        }
    }
    match cli.command {
        Command::Run { config, out } => {
            if !config.is_file() {
                let _ = writeln!(stderr, "error: config file `{}` not found", config.display());
                return EXIT_USAGE;
            }
            finish(run(&config, out.as_deref(), stdout), stderr)
        }
        Command::Verify { filter } => {
            let checks = verify::run(filter.as_deref());
            if checks.is_empty() {
                let _ = writeln!(stderr, "error: no suite matches the filter");
                return EXIT_USAGE;
            }
            let mut failed = 0;
            for c in &checks {
                let _ = writeln!(stdout, "{} [{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.suite, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            let _ = writeln!(stdout, "{} checks, {} failed", checks.len(), failed);
            if failed > 0 {
                let _ = writeln!(stderr, "error: {failed} verification check(s) failed");
                EXIT_FAILURE
            } else {
                0
            }
        }
        Command::Report { csv } => finish(report(&csv, stdout), stderr),
    }
}

fn finish(result: Result<()>, stderr: &mut dyn Write) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn run(config: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::parse(&fs::read_to_string(config)?)?;
    let dir = out.map_or_else(|| PathBuf::from(&cfg.output.directory), Path::to_path_buf);
    fs::create_dir_all(&dir)?;
    let (mut sim, dts) = cfg.build(ExecPolicy::Parallel)?;
    let run = run_transient(&mut sim, &dts);
    let provenance = cfg.echo();
    fs::write(dir.join("reports.csv"), render_reports(&provenance, &run.reports))?;
    fs::write(dir.join("steps.csv"), render_steps(&provenance, &run.summaries))?;
    if cfg.output.snapshot_every > 0 {
        for state in run.states.iter().filter(|s| s.time_level % cfg.output.snapshot_every == 0) {
            write_vtk(state, &sim.mesh, &sim.model, cfg.scenario.initial_pressure, &dir.join(format!("state_{:04}.vtk", state.time_level)))?;
        }
    }
    for s in &run.summaries {
        writeln!(
            stdout,
            "step {:>4}  t = {:<12e} iterations {:>3}  max ratio {:.4}  mass residual {:.2e}",
            s.step, s.time, s.iterations, s.max_ratio, s.mass_residual
        )?;
    }
    writeln!(stdout, "wrote {}", dir.display())?;
    match run.error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn report(path: &Path, stdout: &mut dyn Write) -> Result<()> {
    let table = parse_csv(&fs::read_to_string(path)?)?;
    stdout.write_all(render_summary(&table)?.as_bytes())?;
    Ok(())
}
