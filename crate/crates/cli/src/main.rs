use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use msl_core::harness::{emit, run, ExperimentConfig, ExperimentKind, Format, RunOptions};
use msl_core::Error;

#[derive(Parser)]
#[command(name = "msl", version, about = "Multisource classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Excess-risk rates over a sample-size sweep
    Rates(RunArgs),
    /// Rates of pooled and multisource learners over a source sweep
    Pooling(RunArgs),
    /// Pooled vs source-only vs target-only on the asymmetry pair
    Asymmetry(RunArgs),
    /// Rank-based vs pooled learning on the impossibility construction
    Adaptivity(RunArgs),
    /// Check instance assumptions
    Validate(RunArgs),
    /// Evaluate the rate and bound calculators
    Bounds(RunArgs),
    /// Greedy sign-vector packings
    Pack(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the replication count
    #[arg(long)]
    reps: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats (comma separated)
    #[arg(long, value_delimiter = ',', value_parser = parse_format)]
    format: Vec<Format>,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Run even if the instance fails its assumption checks
    #[arg(long)]
    force: bool,
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        "svg" => Ok(Format::Svg),
        other => Err(format!("unknown format '{other}' (csv, json, svg)")),
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_ASSUMPTION: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Assumption(_) => EXIT_ASSUMPTION,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Rates(a) => (ExperimentKind::Rates, a),
        Command::Pooling(a) => (ExperimentKind::Pooling, a),
        Command::Asymmetry(a) => (ExperimentKind::Asymmetry, a),
        Command::Adaptivity(a) => (ExperimentKind::Adaptivity, a),
        Command::Validate(a) => (ExperimentKind::Validate, a),
        Command::Bounds(a) => (ExperimentKind::Bounds, a),
        Command::Pack(a) => (ExperimentKind::Pack, a),
    };
    match execute(kind, args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("msl: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(kind: ExperimentKind, args: RunArgs) -> msl_core::Result<u8> {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| match e {
        Error::Io(io) => Error::Config(format!("{}: {io}", args.config.display())),
        other => other,
    })?;
    if cfg.experiment != kind {
        return Err(Error::Config(format!(
            "config describes a '{}' experiment, not '{}'",
            cfg.experiment.name(),
            kind.name()
        )));
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(r) = args.reps {
        cfg.replications = r;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if let Some(o) = &args.out {
        cfg.output.dir = o.display().to_string();
    }
    if !args.format.is_empty() {
        cfg.output.formats = args.format.clone();
    }
    cfg.validate()?;

    let outcome = run(&cfg, RunOptions { force: args.force })?;
    print!("{}", outcome.report.to_text());
    let dir = PathBuf::from(&cfg.output.dir);
    for &f in &cfg.output.formats {
        for path in emit(&outcome.report, f, &dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(if outcome.assumptions_hold { 0 } else { EXIT_ASSUMPTION })
}
