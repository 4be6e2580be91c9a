mod alloc_track;
mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};

#[global_allocator]
static ALLOC: alloc_track::CountingAlloc = alloc_track::CountingAlloc;

/// Train and evaluate energy-based models on binary data with ratio
/// matching and gradient-guided importance sampling.
#[derive(Parser)]
#[command(name = "ebm", version, about, max_term_width = 100)]
struct Cli {
    /// Worker thread cap (default: $EBM_THREADS or all logical processors)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic 2-D Gray-coded dataset or Ising training data
    GenData(commands::gen_data::Args),
    /// Train an energy model on a dataset with a chosen estimator
    Train(commands::train::Args),
    /// Evaluate a checkpoint: MMD, objective value, or coupling RMSE
    Eval(commands::eval::Args),
    /// Export an energy-landscape grid for a 2-D-encoded MLP checkpoint
    Landscape(commands::landscape::Args),
    /// Compare per-batch train-step wall time of the full objective vs the
    /// sampled estimator across dimensions
    Bench(commands::bench::Args),
}

fn main() {
    // --config entries are spliced in as flags before clap ever runs;
    // clap itself exits with code 2 on usage errors
    let argv = match config::assemble_argv() {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    };
    let cli = Cli::parse_from(argv);

    let threads = config::resolve_threads(cli.threads);
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();

    let result = match cli.command {
        Command::GenData(args) => commands::gen_data::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::Landscape(args) => commands::landscape::run(args),
        Command::Bench(args) => commands::bench::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(3);
    }
}
