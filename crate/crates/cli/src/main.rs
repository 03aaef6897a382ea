use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use splineprob::{run_file, RunOptions};

/// Probabilistic ODE solving with B-spline Gaussian priors.
#[derive(Parser, Debug)]
#[command(name = "splineprob", version, about)]
struct Args {
    /// Experiment config (JSON), or a manifest.json from an earlier run.
    config: PathBuf,

    /// Output directory; overrides `output.dir` in the config.
    #[arg(long, value_name = "PATH")]
    output_dir: Option<PathBuf>,

    /// Suppress progress messages on stderr.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let opts = RunOptions { output_dir: args.output_dir, quiet: args.quiet };
    match run_file(&args.config, &opts) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("splineprob: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
