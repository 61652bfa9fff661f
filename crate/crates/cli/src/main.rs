//! `compose`: dataset generation, action-table precomputation, training,
//! evaluation and rendering.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric abort.

mod config;
mod error;
mod eval;
mod gen;
mod render;
mod train;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "compose", version, about = "Search-based composition of geometric pieces under learned goals")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the rectangle-packing dataset.
    GenRect(gen::GenRectArgs),
    /// Build and store the tangram action table.
    PrecomputeTangram(gen::PrecomputeArgs),
    /// Train policy and reward model.
    Train(train::TrainArgs),
    /// Evaluate a checkpoint and write report tables.
    Eval(eval::EvalArgs),
    /// Render states or configurations as SVG.
    Render(render::RenderArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::GenRect(a) => gen::gen_rect(a),
        Command::PrecomputeTangram(a) => gen::precompute_tangram(a),
        Command::Train(a) => train::train(a),
        Command::Eval(a) => eval::eval(a),
        Command::Render(a) => render::render(a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
