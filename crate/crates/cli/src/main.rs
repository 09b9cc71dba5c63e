//! `usage-shift`: tokenize corpora, train embeddings, rank words by usage
//! change, and measure stability and agreement with gold rankings.

mod commands;
mod config;
mod error;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "usage-shift", version, about = "Detect words whose usage differs between two corpora")]
struct Cli {
    /// key=value configuration file (or a JSON sidecar of an earlier run).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Single-threaded everywhere; outputs are byte-reproducible.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    /// Print every configuration key with its default and exit.
    #[arg(long)]
    list_keys: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug)]
struct SpaceArgs {
    /// Embeddings of corpus A (word2vec text, or binary with a .bin suffix).
    #[arg(long)]
    emb_a: PathBuf,
    #[arg(long)]
    emb_b: PathBuf,
    /// Frequency table of corpus A; defaults to `<emb-a>.freq.tsv`.
    #[arg(long)]
    freq_a: Option<PathBuf>,
    #[arg(long)]
    freq_b: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize raw text into one tokenized sentence per line plus a
    /// frequency table.
    Tokenize {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Frequency table path; defaults to `<output>.freq.tsv`.
        #[arg(long)]
        freq: Option<PathBuf>,
    },
    /// Train SGNS embeddings on a tokenized corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        min_count: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank shared words by nearest-neighbor intersection.
    Detect {
        #[command(flatten)]
        spaces: SpaceArgs,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Rank shared words by cosine distance after orthogonal alignment.
    Aligncos {
        #[command(flatten)]
        spaces: SpaceArgs,
        #[arg(long)]
        output: PathBuf,
        /// Also write the fitted d×d map.
        #[arg(long)]
        map_out: Option<PathBuf>,
    },
    /// Train each corpus once per seed and compare the rankings across seeds.
    Stability {
        #[arg(long)]
        corpus_a: PathBuf,
        #[arg(long)]
        corpus_b: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
        /// Comma-separated seeds.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Score a ranking against a gold ranking (Spearman, DCG) or another
    /// ranking (intersection@k).
    Eval {
        #[arg(long)]
        ranking: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Second ranking for intersection@k.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Depths for intersection@k; comma-separated.
        #[arg(long, default_value = "10")]
        at: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Neighbors of words in each corpus, excluding the shared neighbors.
    Report {
        #[command(flatten)]
        spaces: SpaceArgs,
        #[arg(long = "word", required = true)]
        words: Vec<String>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// 2-D projections of a word's neighborhoods in both spaces, as SVG and TSV.
    Viz {
        #[command(flatten)]
        spaces: SpaceArgs,
        #[arg(long)]
        word: String,
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a synthetic corpus pair with planted usage changes.
    Synth {
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tokens: Option<usize>,
    },
}

impl Command {
    fn flag_overrides(&self) -> Vec<(&'static str, String)> {
        let mut f = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                f.push((k, v));
            }
        };
        match self {
            Command::Train {
                dim,
                epochs,
                min_count,
                seed,
                ..
            } => {
                put("train.dim", dim.map(|v| v.to_string()));
                put("train.epochs", epochs.map(|v| v.to_string()));
                put("train.min_count", min_count.map(|v| v.to_string()));
                put("train.seed", seed.map(|v| v.to_string()));
            }
            Command::Detect { k, .. } => put("detect.k", k.map(|v| v.to_string())),
            Command::Stability { seeds, .. } => put("stability.seeds", seeds.clone()),
            Command::Report { n, k, .. } => {
                put("report.n", n.map(|v| v.to_string()));
                put("detect.k", k.map(|v| v.to_string()));
            }
            Command::Viz { seed, .. } => put("viz.seed", seed.map(|v| v.to_string())),
            Command::Synth { seed, tokens, .. } => {
                put("synth.seed", seed.map(|v| v.to_string()));
                put("synth.tokens", tokens.map(|v| v.to_string()));
            }
            _ => {}
        }
        f
    }
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "warn",
        (false, 1) => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    let Some(command) = cli.command else {
        return Err(CliError::Usage("a subcommand is required (see --help)".into()));
    };
    let mut flags = command.flag_overrides();
    if cli.deterministic {
        flags.push(("train.deterministic", "true".into()));
        flags.push(("train.threads", "1".into()));
    } else if let Some(t) = cli.threads {
        flags.push(("train.threads", t.to_string()));
    }
    let settings = Settings::resolve(cli.config.as_deref(), std::env::vars(), &cli.sets, &flags)?;

    let threads = if settings.get::<bool>("train.deterministic")? {
        1
    } else {
        settings.get::<usize>("train.threads")?
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;

    commands::dispatch(command, &settings)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if cli.list_keys {
        for (k, v, help) in config::KEYS {
            println!("{k}={v}\t# {help}; env {}", config::env_var_name(k));
        }
        return ExitCode::SUCCESS;
    }
    init_logging(cli.verbose, cli.quiet);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
