use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use qmvt::scenario::{tol_quad_from_env, Scenario, Status};
use qmvt::suite::{run_suite, suite_config};
use qmvt::{Error, VerifyConfig};

#[derive(Parser)]
#[command(
    name = "qmvt",
    version,
    about = "Quantile mean value identities: verification, bridge tables and sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the identity described by a scenario file and print a JSON report.
    Verify { file: PathBuf },
    /// Print the bridge density and CDF at N midpoints as CSV.
    Density {
        file: PathBuf,
        #[arg(long)]
        points: usize,
    },
    /// Draw samples from the bridge law, one per line.
    Sample {
        file: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Run the built-in regression suite.
    Report {
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

/// A failed command: exit status plus message for standard error.
struct Failure(Status, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(Status::of_error(&e), e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure(Status::InputError, e.to_string())
    }
}

fn load(file: &Path) -> Result<(Scenario, VerifyConfig), Failure> {
    let text =
        std::fs::read_to_string(file).map_err(|e| Failure(Status::InputError, format!("{}: {e}", file.display())))?;
    let scenario = Scenario::from_json(&text)?;
    let cfg = scenario.config(tol_quad_from_env()?);
    Ok((scenario, cfg))
}

fn verify(file: &Path, out: &mut impl Write) -> Result<Status, Failure> {
    let (scenario, cfg) = load(file)?;
    let report = scenario.run(&cfg)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    writeln!(out, "{json}")?;
    Ok(Status::of_report(&report, cfg.tol_identity))
}

fn density(file: &Path, points: usize, out: &mut impl Write) -> Result<Status, Failure> {
    if points < 2 {
        return Err(Failure(Status::InputError, "--points must be at least 2".into()));
    }
    let (scenario, cfg) = load(file)?;
    let bridge = scenario.bridge(&cfg)?;
    if !bridge.st_order().holds {
        eprintln!(
            "warning: stochastic order fails on the grid (violation {:.3e}); density may be negative",
            bridge.st_order().worst_violation
        );
    }
    writeln!(out, "x,density,cdf")?;
    for i in 0..points {
        let x = (i as f64 + 0.5) / points as f64;
        writeln!(out, "{:.16e},{:.16e},{:.16e}", x, bridge.density(x), bridge.cdf(x))?;
    }
    Ok(Status::Verified)
}

fn sample(file: &Path, count: usize, seed: u64, out: &mut impl Write) -> Result<Status, Failure> {
    let (scenario, cfg) = load(file)?;
    let bridge = scenario.bridge(&cfg)?;
    for z in bridge.sample(count, seed)? {
        writeln!(out, "{z:.16e}")?;
    }
    Ok(Status::Verified)
}

fn report(json: bool, out: &mut impl Write) -> Result<Status, Failure> {
    let tol = tol_quad_from_env()?.unwrap_or(qmvt::quadrature::DEFAULT_TOL);
    let suite = run_suite(&suite_config(tol))?;
    if json {
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&suite).expect("suite serializes")
        )?;
    } else {
        write!(out, "{}", suite.to_table())?;
    }
    Ok(Status::Verified)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(Status::InputError.code() as u8),
            };
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = match cli.command {
        Command::Verify { file } => verify(&file, &mut out),
        Command::Density { file, points } => density(&file, points, &mut out),
        Command::Sample { file, count, seed } => sample(&file, count, seed, &mut out),
        Command::Report { json } => report(json, &mut out),
    };
    let flushed = out.flush();
    let status = match result {
        Ok(status) => status,
        Err(Failure(status, message)) => {
            eprintln!("error: {message}");
            status
        }
    };
    if let Err(e) = flushed {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("error: {e}");
        }
    }
    ExitCode::from(status.code() as u8)
}
