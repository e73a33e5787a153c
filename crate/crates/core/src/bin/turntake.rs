use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use turntake::experiment::{
    cmd_compare, cmd_evaluate, cmd_generate, cmd_gradcheck, cmd_gridsearch, cmd_train, ExperimentConfig, RunOptions,
};
use turntake::multiscale::gradcheck::Fault;
use turntake::par::{self, Execution};
use turntake::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_GRADCHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "turntake", version, about = "Multiscale continuous turn-taking prediction")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed(s).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus to --out.
    Generate,
    /// Train once per seed and report test metrics.
    Train,
    /// Grid search over hidden sizes, dropout and L2 on held-out data.
    Gridsearch,
    /// Score a checkpoint on the test split and dump predictions.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Finite-difference gradient check of every arrangement.
    Gradcheck {
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Welch t-tests between the per-seed results of two training reports.
    Compare { report_a: PathBuf, report_b: PathBuf },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    ExperimentConfig::load(path)
}

fn run(cli: Cli) -> Result<bool, Error> {
    let exec = match cli.common.jobs {
        Some(0) => return Err(Error::Config("--jobs must be positive".into())),
        Some(1) => Execution::Sequential,
        Some(k) => {
            par::set_jobs(k);
            Execution::available()
        }
        None => Execution::available(),
    };
    let opts = RunOptions {
        out: cli.common.out.clone(),
        seed: cli.common.seed,
        exec,
    };
    match cli.command {
        Command::Generate => {
            let s = cmd_generate(&load_config(&cli.common)?, &opts)?;
            println!("wrote {} train and {} test conversations to {}", s.train.len(), s.test.len(), s.dir.display());
        }
        Command::Train => {
            let r = cmd_train(&load_config(&cli.common)?, &opts)?;
            print!("{}", r.table.to_text());
        }
        Command::Gridsearch => {
            let r = cmd_gridsearch(&load_config(&cli.common)?, &opts)?;
            print!("{}", r.table.to_text());
        }
        Command::Evaluate { checkpoint } => {
            let r = cmd_evaluate(&load_config(&cli.common)?, &checkpoint, &opts)?;
            print!("{}", r.table.to_text());
        }
        Command::Gradcheck { inject_fault } => {
            let fault = if inject_fault { Fault::ScaleMasterGradient } else { Fault::None };
            let r = cmd_gradcheck(&opts, fault)?;
            print!("{}", r.table.to_text());
            println!("{}", if r.passed { "gradient check passed" } else { "gradient check FAILED" });
            return Ok(r.passed);
        }
        Command::Compare { report_a, report_b } => {
            let r = cmd_compare(&report_a, &report_b, &opts)?;
            print!("{}", r.table.to_text());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_GRADCHECK),
        Err(e @ Error::Numeric(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_NUMERIC)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
