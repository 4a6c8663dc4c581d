//! Command-line front end for the simulator, checker and harness.
//!
//! Exit codes: 0 on success or when a bound holds, 1 when violations are
//! found (inverted for `prove`, which succeeds only if it finds one), 2 on
//! usage, input or configuration errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use capbound::checker::{check_with, history_from_jsonl};
use capbound::harness::frontier::to_csv;
use capbound::{
    check_bound, frontier_sweep, proof_replay, run as run_scenario, ProofReplaySpec, ReadReference,
    ScenarioConfig, Tick,
};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "capbound",
    version,
    about = "Partition-tolerance bounds for replicated registers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Reference {
    Response,
    Invoke,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its JSON-lines trace.
    Simulate {
        config: PathBuf,
        /// Trace output path (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a trace against declared staleness and latency bounds.
    Check {
        trace: PathBuf,
        #[arg(long)]
        tc: u64,
        #[arg(long)]
        ta: u64,
        /// Also require tc_min + ta >= tp - slack.
        #[arg(long)]
        tp: Option<u64>,
        #[arg(long, default_value_t = 0, requires = "tp")]
        slack: u64,
        /// Tick a read's staleness is measured from.
        #[arg(long, value_enum, default_value_t = Reference::Response)]
        reference: Reference,
    },
    /// Replay the impossibility scenario; succeeds iff a violation is found.
    Prove { spec: PathBuf },
    /// Sweep response deadlines under a partition of length tp.
    Frontier {
        config: PathBuf,
        #[arg(long)]
        tp: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        deadlines: Vec<u64>,
        /// CSV output path (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the longest partition in a scenario's schedule.
    Tp { config: PathBuf },
}

/// A failure to report on stderr with exit code 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match output {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
        }
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn execute(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, Failure> {
    match command {
        Command::Simulate { config, output } => {
            let config = ScenarioConfig::from_json(&read(&config)?)?;
            let trace = run_scenario(&config)?;
            emit(output.as_deref(), &trace.to_jsonl(), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Check {
            trace,
            tc,
            ta,
            tp,
            slack,
            reference,
        } => {
            let history = history_from_jsonl(&read(&trace)?)?;
            let reference = match reference {
                Reference::Response => ReadReference::Response,
                Reference::Invoke => ReadReference::Invoke,
            };
            let report = check_with(&history, Tick(tc), Tick(ta), reference);
            writeln!(stdout, "{}", report.to_json())?;
            let mut code = if report.is_clean() {
                EXIT_OK
            } else {
                EXIT_VIOLATION
            };
            if let Some(tp) = tp {
                let holds = check_bound(&report, Tick(tp), Tick(slack));
                writeln!(
                    stderr,
                    "bound tc_min + ta >= tp - slack: tc_min={} ta={} tp={tp} slack={slack}: {}",
                    report.empirical_tc_min,
                    report.empirical_ta,
                    if holds { "holds" } else { "violated" }
                )?;
                if !holds {
                    code = EXIT_VIOLATION;
                }
            }
            Ok(code)
        }
        Command::Prove { spec } => {
            let spec = ProofReplaySpec::from_json(&read(&spec)?)?;
            let report = proof_replay(&spec)?;
            writeln!(stdout, "{}", report.to_json())?;
            Ok(if report.is_clean() {
                EXIT_VIOLATION
            } else {
                EXIT_OK
            })
        }
        Command::Frontier {
            config,
            tp,
            deadlines,
            output,
        } => {
            let base = ScenarioConfig::from_json(&read(&config)?)?;
            let deadlines: Vec<Tick> = deadlines.into_iter().map(Tick).collect();
            let rows = frontier_sweep(Tick(tp), &deadlines, &base)?;
            emit(output.as_deref(), &to_csv(&rows), stdout)?;
            Ok(if rows.iter().all(|r| r.bound_satisfied) {
                EXIT_OK
            } else {
                EXIT_VIOLATION
            })
        }
        Command::Tp { config } => {
            let config = ScenarioConfig::from_json(&read(&config)?)?;
            let schedule = config.schedule()?;
            writeln!(
                stdout,
                "{}",
                schedule.compute_tp_with(config.reachability, config.horizon)
            )?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            EXIT_USAGE
        }
    }
}
