//! Command-line front end: one subcommand per experiment kind.
//!
//! Exit codes: 0 when every asserted inequality holds, 2 when an assertion
//! fails, 1 on usage or configuration errors. Worker count follows
//! `RAYON_NUM_THREADS`; results are identical for any worker count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mildsol_core::harness::{run_experiment, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "mildsol",
    version,
    about = "Numerical laboratory for jump-driven semilinear evolution equations",
    long_about = "Simulates mild solutions of semilinear evolution equations driven by \
compensated Poisson jump noise and verifies the moment inequalities and \
convergence rates the solvers rely on. Each subcommand runs one experiment \
kind and writes summary.json plus CSV curves into the output directory. \
Set RAYON_NUM_THREADS to control the worker count; outputs are identical \
for any value."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Direct-scheme Monte Carlo with moment curves
    Simulate(RunArgs),
    /// Successive-approximation convergence trace
    Picard(RunArgs),
    /// Coupled two-solution pth-moment decay
    Stability(RunArgs),
    /// Pathwise pth-power inequality residuals
    ItoCheck(RunArgs),
    /// Compensated-Poisson maximal moment bound
    BjCheck(RunArgs),
    /// Convolution maximal bound (contraction semigroups)
    BurkholderCheck(RunArgs),
    /// Structural-constant validator
    Validate(RunArgs),
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Command::Simulate(a) => (ExperimentKind::Simulate, a),
            Command::Picard(a) => (ExperimentKind::Picard, a),
            Command::Stability(a) => (ExperimentKind::Stability, a),
            Command::ItoCheck(a) => (ExperimentKind::ItoCheck, a),
            Command::BjCheck(a) => (ExperimentKind::BjCheck, a),
            Command::BurkholderCheck(a) => (ExperimentKind::BurkholderCheck, a),
            Command::Validate(a) => (ExperimentKind::Validate, a),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML); built-in defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the experiment seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version land here too; only real usage errors
            // should exit nonzero.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let (kind, args) = cli.command.split();
    let mut cfg = match &args.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(cfg) => cfg,
            Err(err) => {
                eprintln!("error: {err}");
                return ExitCode::from(1);
            }
        },
        None => ExperimentConfig::default_for(kind),
    };
    cfg.experiment.kind = kind;
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.experiment.out = out;
    }

    match run_experiment(&cfg) {
        Ok(summary) => {
            for check in &summary.checks {
                let status = if check.passed { "PASS" } else { "FAIL" };
                println!("[{}] {}: {status} ({})", kind.as_str(), check.name, check.detail);
            }
            println!("summary: {}", summary.summary_path.display());
            if summary.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
