//! `srk`: run simulations, work-precision benchmarks and spectra.
//!
//! Failures print `error[<category>]: <message>` on stderr and exit with a
//! category-specific code.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectral_rk::driver::{format_record, CSV_HEADER};
use spectral_rk::{
    energy_spectrum, parse_config_with, parse_matrix, read_checkpoint, work_precision,
    write_report, Error, Overrides, Simulation,
};

#[derive(Parser)]
#[command(name = "srk", version, about = "Pseudo-spectral Navier-Stokes solver with Runge-Kutta time stepping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
        /// Continue from a checkpoint instead of the initial condition.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run a work-precision matrix and write the CSV report.
    Bench {
        matrix: PathBuf,
        /// Report path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the shell energy spectrum of a checkpoint as CSV.
    Spectrum {
        checkpoint: PathBuf,
        /// Output path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OverrideArgs {
    /// Integrator: ab2, rk4, dp5, kcl5 or bs5.
    #[arg(long)]
    integrator: Option<String>,
    /// Tolerance for both tol_abs and tol_rel; selects adaptive stepping.
    #[arg(long, conflicts_with = "dt")]
    tol: Option<f64>,
    /// Fixed step size; selects fixed stepping.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Grid points per axis, e.g. 32x32x32.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<Vec<usize>>,
    /// Output directory for diagnostics and checkpoints.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<Vec<usize>, String> {
    s.split(['x', ','])
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad grid size '{p}': {e}"))
        })
        .collect()
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" | "usage" => 2,
        "io" => 3,
        "numerical" => 4,
        "format" => 5,
        _ => 1,
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(config: &Path, o: OverrideArgs, resume: Option<&Path>) -> Result<(), Error> {
    let text = fs::read_to_string(config)?;
    let overrides = Overrides {
        integrator: o.integrator,
        tol: o.tol,
        dt: o.dt,
        t_end: o.t_end,
        grid: o.grid,
        output_dir: o.out,
    };
    let cfg = parse_config_with(&text, &overrides)?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let sim = match resume {
        Some(p) => Simulation::resume(&cfg, read_checkpoint(p)?)?,
        None => Simulation::new(&cfg)?,
    };
    let out = sim.run()?;
    if cfg.output_dir.is_none() {
        let mut w = output(None)?;
        writeln!(w, "{CSV_HEADER}")?;
        for r in &out.records {
            writeln!(w, "{}", format_record(r))?;
        }
        w.flush()?;
    }
    eprintln!(
        "{} {}: t = {}, {} steps, {} rhs evaluations, {} rejections",
        cfg.problem.kind.name(),
        cfg.method,
        out.state.time,
        out.accepted_steps,
        out.rhs_evals,
        out.rejections
    );
    Ok(())
}

fn bench(matrix: &Path, out: Option<&Path>) -> Result<(), Error> {
    let m = parse_matrix(&fs::read_to_string(matrix)?)?;
    let (_, points) = work_precision(&m, |p| {
        let status = p.failure.as_deref().unwrap_or("ok");
        eprintln!(
            "{} {}: {} rhs evaluations, L2 error {:e} ({status})",
            p.integrator, p.setting, p.rhs_evals, p.l2_error
        );
    })?;
    let mut w = output(out)?;
    write_report(&points, &mut w)?;
    w.flush()?;
    Ok(())
}

fn spectrum(checkpoint: &Path, out: Option<&Path>) -> Result<(), Error> {
    let ck = read_checkpoint(checkpoint)?;
    let s = energy_spectrum(ck.state.velocity(), &ck.grid);
    let mut w = output(out)?;
    writeln!(w, "k,E")?;
    for (k, e) in s.shells.iter().zip(&s.energy) {
        writeln!(w, "{k},{e:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            overrides,
            resume,
        } => run(&config, overrides, resume.as_deref()),
        Command::Bench { matrix, out } => bench(&matrix, out.as_deref()),
        Command::Spectrum { checkpoint, out } => spectrum(&checkpoint, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
