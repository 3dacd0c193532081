use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use banachflow::evolution::{CheckParams, EvolutionProblem};
use banachflow::harness::{execute, run_suite, MajorantSpec, RunConfig, Task, VerificationReport};
use banachflow::rate_bounds::oracle_ode;
use banachflow::{Error, ScalarFn, TimeGrid};

#[derive(Parser)]
#[command(name = "banachflow", version, about = "Decay majorants and dual-space evolution checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a majorant curve from a rate spec.
    Majorant {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also compare with the equality solution on this grid and write the report.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve the equality ODE and write `t,value` rows.
    Oracle {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "log:1:100:1000")]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuzz the duality inequalities on random pairs.
    VerifyGeometry {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        radius: f64,
        #[arg(long)]
        l: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate a problem and write its trace; optionally check theorems.
    Simulate {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "theorem")]
        theorems: Vec<u8>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve the regularized stationary problems along a schedule.
    Regularized {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check a recorded trace against a theorem.
    Check {
        #[arg(long = "theorem", required = true)]
        theorems: Vec<u8>,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one JSON run configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the report and artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every config in a directory and print the coverage table.
    Suite {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

/// Usage or configuration problems exit 1; everything else is a failed check.
fn status_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        _ => 2,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(status_for(&e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, contents: &[u8]) -> Result<(), Error> {
    match out {
        Some(p) => Ok(std::fs::write(p, contents)?),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(contents)?;
            Ok(())
        }
    }
}

fn artifact<'a>(run: &'a banachflow::harness::RunOutput, name: &str) -> Option<&'a [u8]> {
    run.artifacts.iter().find(|a| a.name == name).map(|a| a.contents.as_slice())
}

/// Writes the report if asked, prints a one-line summary and maps to a status.
fn finish(report: &VerificationReport, path: Option<&Path>) -> Result<ExitCode, Error> {
    if let Some(p) = path {
        std::fs::write(p, report.to_json())?;
    }
    for r in report.records.iter().filter(|r| !r.pass) {
        eprintln!("FAIL {} [{}] lhs={:e} rhs={:e} {}", r.id, r.anchor, r.lhs, r.rhs, r.detail);
    }
    eprintln!(
        "{}: {}/{} checks passed",
        report.name, report.summary.passed, report.summary.total
    );
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn config(name: &str, task: Task) -> RunConfig {
    RunConfig { name: name.into(), seed: 0, task }
}

fn workers(flag: Option<usize>) -> Result<usize, Error> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("BANACHFLOW_WORKERS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("BANACHFLOW_WORKERS must be a positive integer (got `{v}`)"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Majorant { spec, out, grid, report } => {
            let spec: MajorantSpec = read_json(&spec)?;
            let curve = spec.curve()?;
            emit(out.as_deref(), serde_json::to_string_pretty(&curve.to_record())?.as_bytes())?;
            if grid.is_some() || report.is_some() {
                let run = execute(&config(
                    "majorant",
                    Task::Majorant { spec, grid, oracle_lambda0: None, curve_scale: 1.0 },
                ));
                return finish(&run.report, report.as_deref());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { spec, grid, out } => {
            let spec: MajorantSpec = read_json(&spec)?;
            let grid: TimeGrid = grid.parse()?;
            let g = spec.general()?;
            let series = oracle_ode(|t| (g.alpha)(t), |t| (g.gamma)(t), |l| (g.psi)(l), g.lambda0, &grid)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["t", "value"])?;
            for (t, v) in grid.points().iter().zip(&series) {
                w.write_record([format!("{t:e}"), format!("{v:e}")])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            emit(out.as_deref(), &bytes)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyGeometry { p, dim, pairs, seed, radius, l, out } => {
            let cfg = RunConfig {
                name: "verify-geometry".into(),
                seed,
                task: Task::VerifyGeometry { p, dim, pairs, radius, l },
            };
            let run = execute(&cfg);
            emit(out.as_deref(), run.report.to_json().as_bytes())?;
            finish(&run.report, None)
        }
        Command::Simulate { problem, t_end, out, theorems, report } => {
            let problem: EvolutionProblem = read_json(&problem)?;
            let run = execute(&config(
                "simulate",
                Task::Simulate { problem, theorems, params: CheckParams::default(), t_end },
            ));
            if let Some(csv) = artifact(&run, "trace.csv") {
                emit(out.as_deref(), csv)?;
            }
            finish(&run.report, report.as_deref())
        }
        Command::Regularized { problem, alpha, out, report } => {
            let problem: EvolutionProblem = read_json(&problem)?;
            let alpha = alpha.map(|a| a.parse::<ScalarFn>()).transpose()?;
            let run = execute(&config("regularized", Task::Regularized { problem, alpha }));
            if let Some(csv) = artifact(&run, "path.csv") {
                emit(out.as_deref(), csv)?;
            }
            finish(&run.report, report.as_deref())
        }
        Command::Check { theorems, traj, problem, out } => {
            let problem: EvolutionProblem = read_json(&problem)?;
            let traj = traj.to_string_lossy().into_owned();
            let run = execute(&config(
                "check",
                Task::Check { problem, traj, theorems, params: CheckParams::default() },
            ));
            emit(out.as_deref(), run.report.to_json().as_bytes())?;
            finish(&run.report, None)
        }
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let run = execute(&cfg);
            match out {
                Some(dir) => run.write_to(&dir)?,
                None => emit(None, run.report.to_json().as_bytes())?,
            }
            finish(&run.report, None)
        }
        Command::Suite { dir, out, workers: w } => {
            let report = run_suite(&dir, out.as_deref(), workers(w)?)?;
            for e in &report.entries {
                let tag = if e.pass { "PASS" } else { "FAIL" };
                println!("{tag} {} ({}/{})", e.name, e.summary.passed, e.summary.total);
                for id in &e.failed_records {
                    println!("     failed: {id}");
                }
            }
            println!("\ncoverage:\n{}", report.coverage_table());
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => fail(e),
    }
}
