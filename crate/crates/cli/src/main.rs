use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod svg;
mod table;

use commands::CheckFailed;

/// Stochastic gradient descent-ascent experiments on quadratic minimax games.
///
/// Exit status: 0 on success, 1 when a validation or assertion fails,
/// 2 on usage or configuration errors.
#[derive(Debug, Parser)]
#[command(name = "sgda", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for grid runs (0 uses every core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a quadratic game from a `key = value` config file.
    ///
    /// Keys: n, d, mu_C, L_C, L_B, mu_M, L_M, rank_deficiency, delta,
    /// perturb_fraction, seed. Missing keys take the defaults
    /// (100, 25, 0.4, 1, 4, 0.4, 4, 5, 20, 0.2, 0). --seed overrides `seed`.
    Gen(commands::GenArgs),
    /// Run an algorithm x sampler x batch size x seed grid and write the runs CSV.
    ///
    /// Config keys: game, algorithms, samplers, batch_sizes, epochs, c0, c1,
    /// alpha, beta, seeds, shared_seed, lambda. Command-line flags override the
    /// config. With shared seeds every algorithm sees the same epoch schedules
    /// for a given seed. Full-batch algorithms (gda-sim, gda-alt) run once per
    /// seed and are reported with sampler NS and batch size n.
    Run(commands::RunArgs),
    /// Check a game file against the modelling assumptions.
    Validate(commands::ValidateArgs),
    /// Compare the prefix-mean variance of without-replacement sampling with theory.
    Variance(commands::VarianceArgs),
    /// Analyse a worst-case instance for simultaneous GDA or with-replacement SGD.
    Lowerbound(commands::LowerboundArgs),
    /// Average runs CSVs into mean curves with 95% bands, optionally as SVG.
    ///
    /// Bands are mean ± 1.96·std of the raw normalized potential, with the
    /// population standard deviation (divisor n). The SVG plots them on a
    /// log10 axis. Non-finite values from divergent runs are left out and
    /// num_runs counts the runs that contributed.
    Aggregate(commands::AggregateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&cli.global, a),
        Command::Run(a) => commands::run(&cli.global, a),
        Command::Validate(a) => commands::validate(&cli.global, a),
        Command::Variance(a) => commands::variance(&cli.global, a),
        Command::Lowerbound(a) => commands::lowerbound(&cli.global, a),
        Command::Aggregate(a) => commands::aggregate(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<CheckFailed>() => {
            eprintln!("sgda: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("sgda: {e:#}");
            ExitCode::from(2)
        }
    }
}
