use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use remest::experiment::{
    index_curve, run_experiment, selftest, write_checks, write_index_curve, write_outputs, ExperimentConfig,
    IndexCurveConfig, SelftestHooks,
};
use remest::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_SELFTEST: u8 = 3;

#[derive(Parser)]
#[command(name = "remest", version, about = "Whittle-index scheduling for remote estimation of Gauss-Markov sources")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (sweep point, policy, replication) of an experiment config
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write a per-step trace for every run
        #[arg(long)]
        trace: bool,
    },
    /// Tabulate α(state, 0) for one source and mark its zero crossings
    IndexCurve {
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in numerical checks
    Selftest {
        /// Seed for the Monte-Carlo checks
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the check table to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (simulate) or CSV file (index-curve); overrides the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides the config
    #[arg(long)]
    seed: Option<u64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Domain(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn simulate(common: Common, trace: bool) -> remest::Result<()> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(out) = common.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.trace |= trace;
    let rows = run_experiment(&cfg)?;
    let summary = write_outputs(&rows, &cfg.out_dir, cfg.trace)?;
    eprintln!("{} runs written to {}", rows.len(), summary.display());
    Ok(())
}

fn curve(common: Common) -> remest::Result<()> {
    let mut cfg = IndexCurveConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.unwrap_or_else(|| PathBuf::from("index_curve.csv"));
    let c = index_curve(&cfg)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_index_curve(&c, fs::File::create(&out)?)?;
    let xs: Vec<String> = c.zero_crossings.iter().map(|x| format!("{x:.6}")).collect();
    eprintln!("{} points written to {}; zero crossings: [{}]", c.points.len(), out.display(), xs.join(", "));
    Ok(())
}

fn run_selftest(seed: u64, out: Option<PathBuf>) -> Result<bool, Error> {
    let checks = selftest(&SelftestHooks::default(), seed)?;
    write_checks(&checks, io::stdout().lock())?;
    if let Some(path) = out {
        write_checks(&checks, fs::File::create(path)?)?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_VALIDATION);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let res = match cli.command {
        Command::Simulate { common, trace } => simulate(common, trace),
        Command::IndexCurve { common } => curve(common),
        Command::Selftest { seed, out } => match run_selftest(seed, out) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("selftest failed");
                return ExitCode::from(EXIT_SELFTEST);
            }
            Err(e) => Err(e),
        },
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
