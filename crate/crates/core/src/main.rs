use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use symrec::pipeline::{
    self, load_experiment, read_dataset, run_evaluation, run_experiment, run_featurize, run_preprocessing,
    run_training, write_dataset, LabeledSet, INFO_FILE,
};
use symrec::recognizer::Recognizer;
use symrec::recording::parse_recording;
use symrec::service::{self, ServiceConfig, DEFAULT_BODY_LIMIT};
use symrec::synth::synth_dataset;
use symrec::view::text_grid;

#[derive(Parser)]
#[command(name = "symrec", version, about = "Handwritten mathematical symbol recognition")]
struct Cli {
    /// Project root holding raw-datasets/, preprocessed/, feature-files/ and models/.
    #[arg(long, env = "SYMREC_ROOT", default_value = ".", global = true)]
    root: PathBuf,
    /// Seed for splits, initialization and shuffling.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Single worker thread, for bit-reproducible runs.
    #[arg(long, global = true)]
    reference_mode: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess and split the raw dataset of a preprocessed/<dir>.
    Preprocess(StageArgs),
    /// Compute feature files for a feature-files/<dir>.
    Featurize(StageArgs),
    /// Train the model of a models/<dir>.
    Train(StageArgs),
    /// Evaluate the model of a models/<dir> on its test part.
    Evaluate(StageArgs),
    /// Run a single-file experiment in memory.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Raw dataset base path (`<base>.jsonl` and `<base>.csv`).
        #[arg(long, conflicts_with = "synth")]
        data: Option<PathBuf>,
        /// Use this many synthetic recordings per symbol instead of --data.
        #[arg(long)]
        synth: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify a recording file.
    Classify {
        file: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Run the HTTP classification service.
    Serve {
        #[arg(long, default_value_t = 5000)]
        port: u16,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        host: Option<String>,
        /// Directory served for all other paths.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Allowed CORS origin, `*` for any, `none` to disable.
        #[arg(long, default_value = "*")]
        cors_origin: String,
        #[arg(long, default_value_t = DEFAULT_BODY_LIMIT)]
        body_limit: usize,
    },
    /// Print a recording as a text grid.
    View {
        /// Recording id in the dataset.
        id: u64,
        /// Dataset base path, relative to the root.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 48)]
        width: usize,
        #[arg(long, default_value_t = 24)]
        height: usize,
    },
    /// Write a synthetic labeled dataset.
    Synth {
        /// Output base path, relative to the root.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
    },
}

#[derive(clap::Args)]
struct StageArgs {
    /// Stage directory, relative to the root.
    dir: Option<PathBuf>,
    /// The stage's info.yml; its directory is the stage directory.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl StageArgs {
    fn dir(&self, root: &Path) -> Result<PathBuf> {
        match (&self.dir, &self.config) {
            (Some(d), None) => Ok(root.join(d)),
            (None, Some(c)) => {
                if c.file_name().is_some_and(|n| n != INFO_FILE) {
                    bail!("--config must name an {INFO_FILE} file");
                }
                Ok(c.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            _ => bail!("give either a stage directory or --config"),
        }
    }
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    if cli.reference_mode {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let root = &cli.root;
    match &cli.command {
        Command::Preprocess(a) => {
            let counts = run_preprocessing(root, &a.dir(root)?, cli.seed)?;
            println!("train {} validation {} test {}", counts.train, counts.validation, counts.test);
        }
        Command::Featurize(a) => {
            let counts = run_featurize(root, &a.dir(root)?)?;
            println!("train {} validation {} test {}", counts.train, counts.validation, counts.test);
        }
        Command::Train(a) => {
            let bundle = run_training(root, &a.dir(root)?, cli.seed)?;
            println!("{}", bundle.display());
        }
        Command::Evaluate(a) => {
            let report = run_evaluation(root, &a.dir(root)?)?;
            println!("{report}");
        }
        Command::Experiment {
            config,
            data,
            synth,
            out,
        } => {
            let mut cfg = load_experiment(config)?;
            if cli.seed != 0 {
                cfg.seed = cli.seed;
            }
            let set = match (data, synth) {
                (Some(d), _) => read_dataset(&root.join(d), None)?,
                (None, Some(n)) => {
                    let (symbols, recordings) = synth_dataset(*n, cfg.seed);
                    LabeledSet { symbols, recordings }
                }
                (None, None) => bail!("give --data or --synth"),
            };
            let result = run_experiment(&cfg, &set, out)?;
            println!("{}", result.report);
        }
        Command::Classify { file, model, k } => {
            let recognizer = Recognizer::load(model)?;
            let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            let rec = parse_recording(&text).with_context(|| format!("parsing {}", file.display()))?;
            for h in recognizer.classify(&rec, *k)? {
                let command = recognizer.symbols().command(h.symbol).unwrap_or("?");
                println!("{}\t{}\t{:.6}", h.symbol, command, h.probability);
            }
        }
        Command::Serve {
            port,
            model,
            host,
            static_dir,
            cors_origin,
            body_limit,
        } => {
            let host = host.as_deref().unwrap_or("127.0.0.1");
            let addr: SocketAddr = format!("{host}:{port}").parse().context("listen address")?;
            let config = ServiceConfig {
                model: model.clone(),
                static_dir: static_dir.clone(),
                cors_origin: (cors_origin != "none").then(|| cors_origin.clone()),
                body_limit: *body_limit,
            };
            tokio::runtime::Runtime::new()?.block_on(service::serve(addr, config))?;
        }
        Command::View {
            id,
            data,
            width,
            height,
        } => {
            let set = read_dataset(&root.join(data), None)?;
            let Some(rec) = set.recordings.iter().find(|r| r.id == Some(*id)) else {
                bail!("no recording {id} in {}", data.display());
            };
            if let Some(command) = rec.label.and_then(|l| set.symbols.command(l)) {
                println!("{id}: {command}");
            }
            print!("{}", text_grid(rec, *width, *height));
        }
        Command::Synth { out, per_class } => {
            let (symbols, recordings) = synth_dataset(*per_class, cli.seed);
            let n = recordings.len();
            write_dataset(&root.join(out), &LabeledSet { symbols, recordings })?;
            let (jsonl, _) = pipeline::dataset_paths(&root.join(out));
            println!("{n} recordings -> {}", jsonl.display());
        }
    }
    Ok(())
}
