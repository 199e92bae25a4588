use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dualcert::catalog;
use dualcert::certify::{Spread, SweepOptions};
use dualcert::run::{run, RunConfig, RunOutput};
use dualcert::Error;

#[derive(Parser)]
#[command(name = "certify", version, about = "Residual dual-norm error bounds on embedded domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify every parameter of a run configuration and write a CSV table.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; overrides the config's "output". Default: stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "CERTIFY_WORKERS", value_parser = clap::value_parser!(u16).range(1..))]
        workers: Option<u16>,
        /// Evaluate rows one at a time on the calling thread.
        #[arg(long)]
        serial: bool,
    },
    /// Print the problem sheet of a catalog entry.
    Describe { problem: String },
}

const EXIT_ALL_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Conditioning { .. } | Error::NotCoercive(_) | Error::Numerical(_) => EXIT_ALL_FAILED,
        _ => EXIT_USAGE,
    }
}

fn spread(s: Option<Spread>) -> String {
    s.map(|s| format!("{:.3} / {:.3} / {:.3}", s.min, s.median, s.max))
        .unwrap_or_else(|| "n/a".into())
}

fn report(out: &RunOutput) {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    for row in &out.sweep.rows {
        if let Err(e) = &row.outcome {
            eprintln!("row {} (mu = {:?}) failed: {e}", row.index, row.mu);
        }
    }
    let s = &out.sweep.summary;
    eprintln!(
        "{} of {} rows certified; eff_lower min/median/max {}; eff_upper {}",
        s.succeeded,
        s.succeeded + s.failed,
        spread(s.eff_lower),
        spread(s.eff_upper)
    );
}

fn run_command(config: PathBuf, out: Option<PathBuf>, workers: Option<u16>, serial: bool) -> Result<u8, Error> {
    let cfg = RunConfig::load(&config)?;
    let options = SweepOptions {
        workers: workers.map(usize::from),
        serial,
    };
    let output = run(&cfg, options)?;
    match out.or_else(|| cfg.output.as_ref().map(|p| cfg.resolve(p))) {
        Some(path) => output.write_csv_file(&path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            output.write_csv(&mut lock)?;
            lock.flush().map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })?;
        }
    }
    report(&output);
    Ok(if output.all_failed() { EXIT_ALL_FAILED } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            workers,
            serial,
        } => run_command(config, out, workers, serial),
        Command::Describe { problem } => catalog::lookup(&problem).map(|p| {
            print!("{}", p.describe());
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
