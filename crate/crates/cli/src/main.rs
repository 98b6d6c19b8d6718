mod config;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use cqarank::corpus::{load_threads, write_records, Thread};
use cqarank::embeddings::{EmbeddingTable, SidecarVectors};
use cqarank::evaluator::{evaluate_rankings, gold_map, render_report, summary, EvalReport, DEFAULT_CUTOFF};
use cqarank::features::{read_feature_dump, write_feature_dump, AnnotationSidecar, FeatureConfig, FeatureDump, Resources};
use cqarank::mte::{score_line, SCORE_COLUMNS};
use cqarank::network::Variant;
use cqarank::pipeline::{ablate, build_context, dump_rows, extract, rank_baseline, rank_with_model, render_ablation, train_model};
use cqarank::ranker::{read_rankings, write_rankings, Method};
use cqarank::synthetic::{generate, Signal, SyntheticConfig};
use cqarank::textproc::tokenize;
use cqarank::trainer::{load_model, save_model, EPOCH_LOG_HEADER};
use cqarank::{Error, Result};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "cqarank", version, about = "Rank community-QA comments with a pairwise neural network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML file of flat `key = value` settings.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set epochs=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        RunConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalArg {
    Lexical,
    StemOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an XML or record-format corpus and write it as records.
    Ingest {
        input: PathBuf,
        /// Defaults to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the raw pair features of one split as a feature dump.
    ExtractFeatures {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "train")]
        split: Split,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train a network and save the best checkpoint to `model`.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write the epoch log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Rank the comments of every `test` thread.
    Rank {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// pairwise, classification, baseline-time or baseline-random-<seed>.
        #[arg(short, long, default_value = "pairwise")]
        method: String,
        /// Defaults to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score ranking files against the gold labels of a corpus.
    Evaluate {
        /// Corpus with the gold labels.
        #[arg(long)]
        gold: PathBuf,
        #[arg(short, long, default_value_t = DEFAULT_CUTOFF)]
        k: usize,
        /// Print tab-separated unscaled values instead of the table.
        #[arg(long)]
        summary: bool,
        #[arg(required = true)]
        rankings: Vec<PathBuf>,
    },
    /// Train the full system and one variant per removed feature group.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Metric values for tab-separated hypothesis/reference lines.
    ScoreMetrics {
        /// Defaults to stdin.
        input: Option<PathBuf>,
    },
    /// Write a seeded synthetic corpus, embedding tables and a config.
    GenerateSynthetic {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value = "lexical")]
        signal: SignalArg,
        #[arg(long, default_value_t = 200)]
        train_threads: usize,
        #[arg(long, default_value_t = 50)]
        val_threads: usize,
        #[arg(long, default_value_t = 50)]
        test_threads: usize,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, e: io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_split(cfg: &RunConfig, key: &str, value: &Option<PathBuf>) -> Result<Vec<Thread>> {
    load_threads(&cfg.require(key, value)?)
}

fn load_resources(cfg: &RunConfig, features: &FeatureConfig) -> Result<Resources> {
    let table = |enabled: bool, key: &str, path: &Option<PathBuf>| -> Result<Option<Arc<EmbeddingTable>>> {
        if !enabled {
            return Ok(None);
        }
        let name = key.trim_end_matches("_embeddings");
        Ok(Some(Arc::new(EmbeddingTable::load(name, &cfg.require(key, path)?)?)))
    };
    let syntax = if features.syntax {
        let p = cfg.require("syntax_vectors", &cfg.syntax_vectors)?;
        Some(Arc::new(SidecarVectors::load(&p, cfg.syntax_dim.unwrap_or(0))?))
    } else {
        None
    };
    let annotations = match &cfg.annotations {
        Some(p) => Some(Arc::new(AnnotationSidecar::load(p)?)),
        None => None,
    };
    Ok(Resources {
        google: table(features.google, "google_embeddings", &cfg.google_embeddings)?,
        domain: table(features.domain, "domain_embeddings", &cfg.domain_embeddings)?,
        syntax,
        annotations,
    })
}

/// Training threads are needed for corpus-level NIST weights even when
/// only ranking.
fn nist_reference(cfg: &RunConfig, features: &FeatureConfig) -> Result<Vec<Thread>> {
    match features.nist_weighting {
        cqarank::features::NistWeighting::Corpus => load_split(cfg, "train", &cfg.train),
        cqarank::features::NistWeighting::PerPair => Ok(Vec::new()),
    }
}

fn cmd_ingest(input: &Path, out: Option<&Path>) -> Result<()> {
    let threads = load_threads(input)?;
    let comments: usize = threads.iter().map(|t| t.comments.len()).sum();
    let mut w = output(out)?;
    write_records(&threads, &mut w)?;
    w.flush()?;
    eprintln!("{} threads, {comments} comments", threads.len());
    Ok(())
}

fn cmd_extract(args: &ConfigArgs, split: Split, out: &Path) -> Result<()> {
    let cfg = args.load()?;
    let features = cfg.features();
    cfg.validate_resources(&features)?;
    let threads = match split {
        Split::Train => load_split(&cfg, "train", &cfg.train)?,
        Split::Val => load_split(&cfg, "val", &cfg.val)?,
        Split::Test => load_split(&cfg, "test", &cfg.test)?,
    };
    let res = load_resources(&cfg, &features)?;
    let ctx = build_context(&features, &res, &nist_reference(&cfg, &features)?)?;
    let raw = extract(&ctx, &threads, None)?;
    let mut w = create(out)?;
    write_feature_dump(ctx.schema(), &dump_rows(&raw), &mut w)?;
    w.flush()?;
    eprintln!("{} rows, schema {}", raw.iter().map(|t| t.comments.len()).sum::<usize>(), ctx.schema_id());
    Ok(())
}

fn cmd_train(args: &ConfigArgs, log: Option<&Path>) -> Result<()> {
    let cfg = args.load()?;
    let pc = cfg.pipeline();
    cfg.validate_resources(&pc.features)?;
    let train_path = cfg.require("train", &cfg.train)?;
    let model_path = cfg
        .model
        .clone()
        .ok_or_else(|| Error::Config("`model` is not set".into()))?;
    let train = load_threads(&train_path)?;
    let val = match &cfg.val {
        Some(p) => load_threads(p)?,
        None => Vec::new(),
    };
    let res = load_resources(&cfg, &pc.features)?;
    let ctx = build_context(&pc.features, &res, &train)?;
    let cache: Option<FeatureDump> = match &cfg.features_cache {
        Some(p) => {
            let f = File::open(p).map_err(|e| io_err(p, e))?;
            Some(read_feature_dump(BufReader::new(f), ctx.schema())?)
        }
        None => None,
    };
    let mut log_file = log.map(create).transpose()?;
    let mut emit = |line: &str| {
        eprintln!("{line}");
        if let Some(f) = log_file.as_mut() {
            let _ = writeln!(f, "{line}");
        }
    };
    emit(EPOCH_LOG_HEADER);
    let trained = train_model(&pc, &ctx, &train, &val, cache.as_ref(), |s| emit(&s.log_line()))?;
    for w in &trained.outcome.warnings {
        emit(&format!("# warning: {w}"));
    }
    let m = &trained.model;
    emit(&format!(
        "# best epoch {} ({:?} {}), schema {}",
        m.epoch,
        m.selection,
        m.val_score,
        m.schema_id()
    ));
    if let Some(f) = log_file.as_mut() {
        f.flush()?;
    }
    save_model(m, &model_path)
}

fn cmd_rank(args: &ConfigArgs, method: &str, out: Option<&Path>) -> Result<()> {
    let cfg = args.load()?;
    let method: Method = method.parse()?;
    let test_path = cfg.require("test", &cfg.test)?;
    let rankings = match method {
        Method::Pairwise | Method::Classification => {
            let features = cfg.features();
            cfg.validate_resources(&features)?;
            let model = load_model(&cfg.require("model", &cfg.model)?)?;
            let expected = match method {
                Method::Pairwise => Variant::Pairwise,
                _ => Variant::Classification,
            };
            if model.params.config.variant != expected {
                return Err(Error::Config(format!(
                    "method {method} needs a {expected:?} model, the model file holds a {:?} model",
                    model.params.config.variant
                )));
            }
            let test = load_threads(&test_path)?;
            let res = load_resources(&cfg, &features)?;
            let ctx = build_context(&features, &res, &nist_reference(&cfg, &features)?)?;
            rank_with_model(&model, &ctx, &test, cfg.accumulation())?
        }
        baseline => rank_baseline(&load_threads(&test_path)?, baseline)?,
    };
    let mut w = output(out)?;
    write_rankings(&rankings, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_evaluate(gold: &Path, k: usize, machine: bool, files: &[PathBuf]) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let gold = gold_map(&load_threads(gold)?);
    let mut by_method: Vec<(String, Vec<_>)> = Vec::new();
    for path in files {
        let f = File::open(path).map_err(|e| io_err(path, e))?;
        let rankings = read_rankings(BufReader::new(f))
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        for r in rankings {
            let name = r.method.to_string();
            match by_method.iter_mut().find(|(m, _)| *m == name) {
                Some((_, v)) => v.push(r),
                None => by_method.push((name, vec![r])),
            }
        }
    }
    let mut report = EvalReport::default();
    for (method, rankings) in by_method {
        report.push(method, evaluate_rankings(&rankings, &gold, k)?);
    }
    let text = if machine { summary(&report) } else { render_report(&report) };
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_ablate(args: &ConfigArgs) -> Result<()> {
    let cfg = args.load()?;
    let pc = cfg.pipeline();
    cfg.validate_resources(&pc.features)?;
    let train = load_split(&cfg, "train", &cfg.train)?;
    let test = load_split(&cfg, "test", &cfg.test)?;
    let val = match &cfg.val {
        Some(p) => load_threads(p)?,
        None => Vec::new(),
    };
    let res = load_resources(&cfg, &pc.features)?;
    let rows = ablate(&pc, &res, &train, &val, &test, |r| {
        eprintln!("{}: MAP {:.2}", r.name, r.scores.map * 100.0)
    })?;
    let table = render_ablation(&rows);
    if let Some(dir) = &cfg.output_dir {
        let mut w = create(&dir.join("ablation.txt"))?;
        w.write_all(table.as_bytes())?;
        w.flush()?;
    }
    io::stdout().lock().write_all(table.as_bytes())?;
    Ok(())
}

fn cmd_score_metrics(input: Option<&Path>) -> Result<()> {
    let reader: Box<dyn BufRead> = match input {
        Some(p) => Box::new(BufReader::new(File::open(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(BufReader::new(io::stdin().lock())),
    };
    let mut out = BufWriter::new(io::stdout().lock());
    writeln!(out, "{}", SCORE_COLUMNS.join("\t"))?;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (hyp, reference) = line.split_once('\t').ok_or_else(|| Error::Record {
            line: i + 1,
            message: "expected hypothesis<TAB>reference".into(),
        })?;
        writeln!(out, "{}", score_line(&tokenize(hyp), &tokenize(reference)))?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_generate(out_dir: &Path, cfg: SyntheticConfig) -> Result<()> {
    let d = generate(&cfg);
    for (name, threads) in [("train.tsv", &d.train), ("val.tsv", &d.val), ("test.tsv", &d.test)] {
        let mut w = create(&out_dir.join(name))?;
        write_records(threads, &mut w)?;
        w.flush()?;
    }
    for (name, table) in [("google.txt", &d.google), ("domain.txt", &d.domain)] {
        let mut w = create(&out_dir.join(name))?;
        table.write(&mut w)?;
        w.flush()?;
    }
    let config = "train = \"train.tsv\"\n\
                  val = \"val.tsv\"\n\
                  test = \"test.tsv\"\n\
                  google_embeddings = \"google.txt\"\n\
                  domain_embeddings = \"domain.txt\"\n\
                  model = \"model.bin\"\n\
                  output_dir = \"out\"\n";
    let mut w = create(&out_dir.join("config.toml"))?;
    w.write_all(config.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, output } => cmd_ingest(&input, output.as_deref()),
        Command::ExtractFeatures { cfg, split, output } => cmd_extract(&cfg, split, &output),
        Command::Train { cfg, log } => cmd_train(&cfg, log.as_deref()),
        Command::Rank { cfg, method, output } => cmd_rank(&cfg, &method, output.as_deref()),
        Command::Evaluate {
            gold,
            k,
            summary,
            rankings,
        } => cmd_evaluate(&gold, k, summary, &rankings),
        Command::Ablate { cfg } => cmd_ablate(&cfg),
        Command::ScoreMetrics { input } => cmd_score_metrics(input.as_deref()),
        Command::GenerateSynthetic {
            out_dir,
            seed,
            signal,
            train_threads,
            val_threads,
            test_threads,
        } => cmd_generate(
            &out_dir,
            SyntheticConfig {
                seed,
                signal: match signal {
                    SignalArg::Lexical => Signal::Lexical,
                    SignalArg::StemOnly => Signal::StemOnly,
                },
                train_threads,
                val_threads,
                test_threads,
                ..Default::default()
            },
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Stream(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
