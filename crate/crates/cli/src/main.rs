mod commands;
mod problem;
mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::ProgressKind;
use problem::{parse_problem, Problem};
use report::{Outcome, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Resource(String),
}

impl CliError {
    fn outcome(&self) -> Outcome {
        match self {
            CliError::Input(_) | CliError::Io(_) => Outcome::InputError,
            CliError::Resource(_) => Outcome::ResourceError,
        }
    }
}

/// Exact invariance checking for polynomial ODEs and hybrid programs.
#[derive(Debug, Parser)]
#[command(name = "odeinv", version)]
struct Cli {
    /// Seed for the sampling tier (overrides the problem file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sample count for the sampling tier; 0 disables it.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// SMT solver binary used for the last discharge tier.
    #[arg(long, global = true)]
    solver: Option<PathBuf>,
    /// Include wall-clock timing in the report.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lie derivatives of `polynomial` up to an order.
    Lie {
        problem: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
    },
    /// Differential rank of `polynomial`, with cofactors.
    Rank { problem: PathBuf },
    /// The differential radical formula of `polynomial`.
    Radical { problem: PathBuf },
    /// Forward and backward progress formulas.
    Progress {
        problem: PathBuf,
        #[arg(long, value_enum, default_value = "gt")]
        kind: ProgressKind,
    },
    /// Invariance of `polynomial = 0` under a domain `true` or `r != 0`.
    CheckAlg { problem: PathBuf },
    /// Invariance of each semialgebraic candidate.
    CheckInv { problem: PathBuf },
    /// Darboux cofactor search; vectorial when `polynomials` is given.
    Darboux { problem: PathBuf },
    /// Reduces `[program] post` to a single polynomial equation.
    HpReduce { problem: PathBuf },
    /// Writes pending side conditions as SMT-LIB queries.
    EmitSmt {
        problem: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-verifies a JSON certificate or a report containing one.
    CertCheck { certificate: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Lie { .. } => "lie",
            Command::Rank { .. } => "rank",
            Command::Radical { .. } => "radical",
            Command::Progress { .. } => "progress",
            Command::CheckAlg { .. } => "check-alg",
            Command::CheckInv { .. } => "check-inv",
            Command::Darboux { .. } => "darboux",
            Command::HpReduce { .. } => "hp-reduce",
            Command::EmitSmt { .. } => "emit-smt",
            Command::CertCheck { .. } => "cert-check",
        }
    }

    fn input(&self) -> &PathBuf {
        match self {
            Command::Lie { problem, .. }
            | Command::Rank { problem }
            | Command::Radical { problem }
            | Command::Progress { problem, .. }
            | Command::CheckAlg { problem }
            | Command::CheckInv { problem }
            | Command::Darboux { problem }
            | Command::HpReduce { problem }
            | Command::EmitSmt { problem, .. } => problem,
            Command::CertCheck { certificate } => certificate,
        }
    }
}

fn run(cli: &Cli, report: &mut Report) -> Result<(), CliError> {
    let path = cli.command.input();
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let (problem, mut config) = match &cli.command {
        Command::CertCheck { .. } => (None, Default::default()),
        _ => {
            let pb = Problem::new(parse_problem(&text)?)?;
            let config = pb.discharge_config()?;
            (Some(pb), config)
        }
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(n) = cli.samples {
        config.samples = n;
    }
    if cli.solver.is_some() {
        config.solver = cli.solver.clone();
    }
    report.set("seed", json!(config.seed));
    let Some(pb) = problem else {
        return commands::cert_check(&text, &config, report);
    };
    match &cli.command {
        Command::Lie { order, .. } => commands::lie(&pb, *order, report),
        Command::Rank { .. } => commands::rank_cmd(&pb, &config, report),
        Command::Radical { .. } => commands::radical(&pb, &config, report),
        Command::Progress { kind, .. } => commands::progress(&pb, *kind, &config, report),
        Command::CheckAlg { .. } => commands::check_alg(&pb, &config, report),
        Command::CheckInv { .. } => commands::check_inv(&pb, &config, report),
        Command::Darboux { .. } => commands::darboux(&pb, report),
        Command::HpReduce { .. } => commands::hp_reduce(&pb, &config, report),
        Command::EmitSmt { out_dir, .. } => commands::emit_smt(&pb, out_dir.as_deref(), &config, report),
        Command::CertCheck { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let start = Instant::now();
    let mut report = Report::new(cli.command.name(), 0);
    if let Err(e) = run(&cli, &mut report) {
        eprintln!("odeinv: {e}");
        report.outcome = e.outcome();
        report.set("error", json!(e.to_string()));
    }
    if cli.timing {
        report.set("elapsed_ms", json!(start.elapsed().as_secs_f64() * 1e3));
    }
    match serde_json::to_string_pretty(&report.to_json()) {
        // A closed stdout (e.g. `| head`) is not worth a panic.
        Ok(s) => drop(writeln!(std::io::stdout().lock(), "{s}")),
        Err(e) => eprintln!("odeinv: {e}"),
    }
    report.outcome.into()
}
