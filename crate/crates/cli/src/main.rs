//! `shl`: runs one experiment from a JSON configuration and writes a result
//! bundle with a manifest.
//!
//! Exit codes: `0` success, `1` bad configuration or input, `2` a failed
//! accuracy check (outputs are still written), `3` no nontrivial solution.

mod config;
mod experiments;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::de::DeserializeOwned;

use config::{ExtensionParams, ResolventParams, ScanParams, SolveParams, SpecfunParams, ThresholdParams};
use output::{sha256_hex, write_bundle, Failure, Report};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    VerifySpecfun,
    VerifyExtension,
    ScanAdmissibility,
    Thresholds,
    VerifyResolvent,
    SolveNls,
}

#[derive(Debug, Parser)]
#[command(name = "shl", version = shl_core::VERSION, about = "Nonlinear Helmholtz experiments")]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON parameter file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    verbose: bool,
}

/// A parsed and validated configuration, ready to run.
enum Job {
    Specfun(SpecfunParams),
    Extension(ExtensionParams),
    Scan(ScanParams),
    Thresholds(ThresholdParams),
    Resolvent(ResolventParams),
    Solve(SolveParams),
}

fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, Failure> {
    serde_json::from_slice(bytes).map_err(|e| Failure::Config(e.to_string()))
}

impl Job {
    fn load(experiment: Experiment, bytes: &[u8]) -> Result<Self, Failure> {
        let job = match experiment {
            Experiment::VerifySpecfun => Job::Specfun(parse(bytes)?),
            Experiment::VerifyExtension => Job::Extension(parse(bytes)?),
            Experiment::ScanAdmissibility => Job::Scan(parse(bytes)?),
            Experiment::Thresholds => Job::Thresholds(parse(bytes)?),
            Experiment::VerifyResolvent => Job::Resolvent(parse(bytes)?),
            Experiment::SolveNls => Job::Solve(parse(bytes)?),
        };
        match &job {
            Job::Specfun(c) => c.validate()?,
            Job::Extension(c) => drop(c.validate()?),
            Job::Scan(c) => drop(c.validate()?),
            Job::Thresholds(c) => drop(c.validate()?),
            Job::Resolvent(c) => c.validate()?,
            Job::Solve(c) => drop(c.validate()?),
        }
        Ok(job)
    }

    fn output_dir(&self) -> Option<&Path> {
        match self {
            Job::Specfun(c) => c.output_dir.as_deref(),
            Job::Extension(c) => c.output_dir.as_deref(),
            Job::Scan(c) => c.output_dir.as_deref(),
            Job::Thresholds(c) => c.output_dir.as_deref(),
            Job::Resolvent(c) => c.output_dir.as_deref(),
            Job::Solve(c) => c.output_dir.as_deref(),
        }
    }

    fn run(&self) -> Result<Report, Failure> {
        match self {
            Job::Specfun(c) => experiments::verify_specfun(c),
            Job::Extension(c) => experiments::verify_extension(c),
            Job::Scan(c) => experiments::scan_admissibility(c),
            Job::Thresholds(c) => experiments::thresholds(c),
            Job::Resolvent(c) => experiments::verify_resolvent(c),
            Job::Solve(c) => experiments::solve_nls(c),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("SHL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Config(format!("SHL_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    let bytes = std::fs::read(&cli.config)?;
    let config_sha = sha256_hex(&bytes);
    let job = Job::load(cli.experiment, &bytes)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| job.output_dir().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    configure_threads()?;
    let name = cli
        .experiment
        .to_possible_value()
        .map(|v| v.get_name().to_owned())
        .unwrap_or_default();
    if cli.verbose {
        eprintln!("shl {name}: config sha256 {config_sha}, output {}", dir.display());
    }
    let report = job.run()?;
    write_bundle(&dir, &name, &config_sha, &report)?;
    if cli.verbose {
        eprintln!("{}", serde_json::to_string_pretty(&report.summary).unwrap_or_default());
    }
    eprintln!(
        "shl {name}: {:?}, {} file(s) in {}",
        report.status,
        report.files.len() + 1,
        dir.display()
    );
    Ok(report.status.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("shl: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
