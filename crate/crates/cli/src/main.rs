use std::path::PathBuf;
use std::process::ExitCode;

use arousal_cli::{stages, RunConfig, StageError};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "arousal",
    version,
    about = "Detect hyperarousal events in wearable heart-rate and acceleration streams"
)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate synthetic recordings and ground truth.
    Synth,
    /// Impute missing samples and dump the window table.
    Preprocess,
    /// Extract window features.
    Features,
    /// Split participants into train and test.
    Split,
    /// Upsample the training set and fit the configured models.
    Train,
    /// Score the test set: AUC, ROC and operating-point matrices.
    Evaluate,
    /// Pairwise 5x2cv paired t-tests between models.
    Compare,
    /// Resampling-ratio sensitivity sweep.
    Sweep,
    /// TreeSHAP summaries and plots for a tree-ensemble model.
    Explain,
    /// All stages in order.
    Pipeline,
}

fn run(cli: &Cli) -> Result<(), StageError> {
    let config_error = |source| StageError { stage: "config", source };
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(config_error)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate().map_err(config_error)?;
    match cli.command {
        Command::Synth => stages::synth(&cfg).map(drop),
        Command::Preprocess => stages::preprocess(&cfg).map(drop),
        Command::Features => stages::features(&cfg).map(drop),
        Command::Split => stages::split(&cfg).map(drop),
        Command::Train => stages::train(&cfg).map(drop),
        Command::Evaluate => stages::evaluate(&cfg).map(drop),
        Command::Compare => stages::compare(&cfg).map(drop),
        Command::Sweep => stages::sweep(&cfg).map(drop),
        Command::Explain => stages::explain(&cfg).map(drop),
        Command::Pipeline => stages::pipeline(&cfg).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
