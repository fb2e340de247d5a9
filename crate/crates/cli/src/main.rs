use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};

use ical::context::write_context_trace;
use ical::datasets::fetch::{fetch_source, known_source};
use ical::datasets::stream_file::write_stream;
use ical::datasets::{build_stream, load_stream, DataOptions, StreamName};
use ical::eval::{render_table, write_trace_csv, Summary, DEFAULT_ALPHA};
use ical::experiment::{paper_defaults, run_comparison, RunConfig};
use ical::learners::{LearnerConfig, LearnerKind};
use ical::par::Execution;
use ical::plot::render_svg;
use ical::stream::Stream;

const EXIT_USAGE: u8 = 2;
const EXIT_INGESTION: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "ical", version, about = "Implicit context-aware online learning experiments")]
struct Cli {
    /// Dataset cache directory.
    #[arg(long, env = "ICAL_CACHE_DIR", global = true)]
    cache_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download and cache a UCI dataset (currently: propulsion).
    Fetch {
        dataset: String,
        /// Override the download URL (http(s), file:// or a local path).
        #[arg(long)]
        url: Option<String>,
        /// Expected SHA-256 of the archive.
        #[arg(long)]
        sha256: Option<String>,
    },
    /// Write a generated stream as CSV.
    Gen {
        #[arg(long)]
        stream: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a prequential comparison and write trace, summary and plots.
    Run(RunArgs),
    /// Render the comparison table from stored summaries.
    Report {
        /// Run directories or summary.json files.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "stream_file", required_unless_present = "stream_file")]
    stream: Option<String>,
    /// Stream CSV produced by `gen` (or any file in that layout).
    #[arg(long)]
    stream_file: Option<PathBuf>,
    /// `all` or a comma list of ical-mem, ical, non-cal, myopic.
    #[arg(long, default_value = "all")]
    learners: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "ical-out")]
    out: PathBuf,
    /// Use the locked reference preset; rejects hyperparameter flags.
    #[arg(long, conflicts_with_all = ["t", "big_t", "w", "z_threshold", "lr", "epochs", "retrain_period"])]
    paper_defaults: bool,
    /// Accuracy threshold t.
    #[arg(long = "t", default_value_t = 0.9)]
    t: f64,
    /// Accuracy / autoencoder window T.
    #[arg(long = "T", id = "big_t", default_value_t = 20)]
    big_t: usize,
    /// Myopic window W.
    #[arg(long = "W", id = "w", default_value_t = 50)]
    w: usize,
    #[arg(long, default_value_t = 3.0)]
    z_threshold: f64,
    /// Autoencoder learning rate.
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Autoencoder epochs per update.
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Classifier retrain period R.
    #[arg(long, default_value_t = 1)]
    retrain_period: usize,
    /// EWMA smoothing for plots and traces.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Run learners one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

/// Error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<ical::Error> for Failure {
    fn from(e: ical::Error) -> Self {
        use ical::Error as E;
        let code = match &e {
            E::InvalidConfig(_) | E::UnknownDataset(_) => EXIT_USAGE,
            E::Parse { .. } | E::Ingestion(_) | E::Network { .. } | E::ChecksumMismatch { .. } | E::Csv(_) => {
                EXIT_INGESTION
            }
            _ => EXIT_RUNTIME,
        };
        Failure { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            error,
        }
    }
}

fn usage(msg: String) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: anyhow::anyhow!(msg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = DataOptions {
        cache_dir: cli.cache_dir.clone().unwrap_or_else(ical::datasets::default_cache_dir),
        ..DataOptions::default()
    };
    let result = match cli.command {
        Command::Fetch { dataset, url, sha256 } => fetch(&dataset, url, sha256, &opts),
        Command::Gen { stream, seed, out } => gen(&stream, seed, out.as_deref(), &opts),
        Command::Run(args) => run(&args, &opts),
        Command::Report { paths } => report(&paths),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn parse_stream(name: &str) -> Result<StreamName, Failure> {
    StreamName::parse(name).map_err(|_| {
        usage(format!(
            "unknown stream `{name}` (expected stagger, propulsion or mnist-digits)"
        ))
    })
}

fn fetch(dataset: &str, url: Option<String>, sha256: Option<String>, opts: &DataOptions) -> Result<(), Failure> {
    let mut source = known_source(dataset)?;
    if let Some(url) = url {
        source.url = url;
    }
    if sha256.is_some() {
        source.sha256 = sha256;
    }
    let outcome = fetch_source(&source, &opts.cache_dir)?;
    let verb = if outcome.downloaded { "fetched" } else { "cached" };
    println!("{verb} {}", outcome.path.display());
    Ok(())
}

fn gen(stream: &str, seed: u64, out: Option<&Path>, opts: &DataOptions) -> Result<(), Failure> {
    let s = build_stream(parse_stream(stream)?, seed, opts)?;
    match out {
        Some(path) => {
            let mut buf = Vec::new();
            write_stream(&s, &mut buf)?;
            fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
        }
        None => write_stream(&s, io::stdout().lock())?,
    }
    Ok(())
}

fn parse_learners(list: &str) -> Result<Vec<LearnerKind>, Failure> {
    if list == "all" {
        return Ok(LearnerKind::ALL.to_vec());
    }
    let mut kinds = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let kind = LearnerKind::parse(name).map_err(|e| usage(e.to_string()))?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(usage("no learners selected".into()));
    }
    Ok(kinds)
}

fn learner_config(args: &RunArgs, stream: Option<StreamName>) -> LearnerConfig {
    if args.paper_defaults {
        return paper_defaults(stream.unwrap_or(StreamName::Stagger));
    }
    let mut cfg = LearnerConfig {
        accuracy_threshold: args.t,
        accuracy_window: args.big_t,
        myopic_window: args.w,
        retrain_period: args.retrain_period,
        warmup_n: args.big_t,
        cooldown: args.big_t,
        normalize: stream == Some(StreamName::Propulsion),
        ..LearnerConfig::default()
    };
    cfg.context.z_threshold = args.z_threshold;
    cfg.train.learning_rate = args.lr;
    cfg.train.epochs_per_update = args.epochs;
    cfg
}

fn run(args: &RunArgs, opts: &DataOptions) -> Result<(), Failure> {
    let learners = parse_learners(&args.learners)?;
    let (stream, name): (Stream, Option<StreamName>) = match (&args.stream, &args.stream_file) {
        (Some(s), _) => {
            let name = parse_stream(s)?;
            (build_stream(name, args.seed, opts)?, Some(name))
        }
        (None, Some(path)) => (load_stream(path, None)?, None),
        (None, None) => return Err(usage("one of --stream or --stream-file is required".into())),
    };
    let mut cfg = RunConfig::new(learners, args.seed, learner_config(args, name));
    cfg.alpha = args.alpha;
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let out = run_comparison(&stream, &cfg, exec)?;

    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |file: &str, bytes: &[u8]| -> anyhow::Result<()> {
        let path = dir.join(file);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
    };
    write("summary.json", format!("{}\n", out.summary.to_json()?).as_bytes())?;
    let config_json = serde_json::json!({
        "stream": stream.spec.name,
        "config_digest": out.config_digest,
        "config": cfg,
    });
    write(
        "config.json",
        format!("{}\n", serde_json::to_string_pretty(&config_json).context("config")?).as_bytes(),
    )?;

    let traces = out.traces();
    let mut csv = Vec::new();
    write_trace_csv(&traces, &mut csv)?;
    write("trace.csv", &csv)?;
    for run in out.runs.iter().filter(|r| r.trace.learner.is_context_aware()) {
        let mut buf = Vec::new();
        write_context_trace(&run.context_trace, &mut buf)?;
        write(&format!("contexts-{}.csv", run.trace.learner.name()), &buf)?;
    }
    let title = format!("{} seed {} ({})", stream.spec.name, args.seed, out.config_digest);
    write("accuracy.svg", render_svg(&traces, &stream.spec, &title).as_bytes())?;

    let mut stdout = io::stdout().lock();
    let _ = write!(stdout, "{}", render_table(std::slice::from_ref(&out.summary)));
    let _ = writeln!(stdout, "wrote {}", dir.display());
    Ok(())
}

fn collect_summaries(path: &Path, into: &mut Vec<PathBuf>) -> io::Result<()> {
    if path.is_file() {
        into.push(path.to_path_buf());
        return Ok(());
    }
    let direct = path.join("summary.json");
    if direct.is_file() {
        into.push(direct);
        return Ok(());
    }
    let mut children: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    for child in children {
        collect_summaries(&child, into)?;
    }
    Ok(())
}

fn report(paths: &[PathBuf]) -> Result<(), Failure> {
    let mut files = Vec::new();
    for p in paths {
        collect_summaries(p, &mut files).map_err(|e| Failure {
            code: EXIT_INGESTION,
            error: anyhow::anyhow!("cannot read {}: {e}", p.display()),
        })?;
    }
    let mut seen = std::collections::BTreeSet::new();
    files.retain(|f| seen.insert(fs::canonicalize(f).unwrap_or_else(|_| f.clone())));
    if files.is_empty() {
        return Err(Failure {
            code: EXIT_INGESTION,
            error: anyhow::anyhow!("no summary.json found"),
        });
    }
    let summaries = files
        .iter()
        .map(|f| {
            let text = fs::read_to_string(f)?;
            serde_json::from_str::<Summary>(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
        })
        .collect::<io::Result<Vec<_>>>()
        .map_err(|e| Failure {
            code: EXIT_INGESTION,
            error: anyhow::anyhow!("bad summary file: {e}"),
        })?;
    print!("{}", render_table(&summaries));
    Ok(())
}
