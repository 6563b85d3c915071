mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use desmiles::config::{load_config, ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "desmiles", version, about = "Fingerprint-to-SMILES generation toolkit")]
struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Vocabulary file; defaults to `<checkpoint>.vocab.json`.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Standardize, filter and deduplicate a SMILES file.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a BPE vocabulary on a SMILES file.
    BuildVocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Train a model from scratch.
    Pretrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Tab-separated per-step training log.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Generate molecules for one fingerprint.
    Generate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, conflicts_with = "fingerprint", required_unless_present = "fingerprint")]
        smiles: Option<String>,
        /// Hex-encoded input fingerprint.
        #[arg(long)]
        fingerprint: Option<String>,
        #[arg(long, default_value_t = 20)]
        top: usize,
        /// Decoding strategy (astar, beam, sample).
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Try to regenerate every molecule of a file from its fingerprint.
    Recover {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        corpus: PathBuf,
        /// JSON-lines per-molecule report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build matched molecular pairs with a property scorer.
    Pairs {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        scorer: Option<String>,
    },
    /// Fine-tune a model on matched pairs.
    Finetune {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        freeze: bool,
    },
    /// Success rate and diversity of property improvement.
    Benchmark {
        /// One checkpoint, or several to evaluate their ensemble.
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        scorer: Option<String>,
        /// Cutoffs, comma separated.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Probability surfaces over the plane through three molecules.
    Landscape {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, num_args = 3, required = true)]
        anchors: Vec<String>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Correlate fingerprint distance with embedding distance.
    Correlate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Merge the A* streams of several models.
    EnsembleGenerate {
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        smiles: String,
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(p) => load_config(p).map_err(|e| match e {
            ConfigError::Io(io) => CliError::Data(format!("{}: {io}", p.display())),
            other => CliError::Usage(format!("{}: {other}", p.display())),
        })?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(w) = cli.workers {
        config.workers = w;
    }
    if config.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_default_env()
        .filter_level(log::LevelFilter::Info)
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = resolve_config(&cli).and_then(|config| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        eprintln!("# resolved configuration (seed {})", config.seed);
        eprint!("{}", config.to_toml());
        commands::run(cli.command, &config)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
