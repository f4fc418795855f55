use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use u3e::baselines::{beam_search_hard_mask, load_embeddings, wv_topk, DEFAULT_BEAM_WIDTH};
use u3e::corpus::{load_corpus, read_jsonl, write_jsonl, Corpus, EvidenceSet, Format};
use u3e::erasure::{changes_matrix, load_changes, ChangeStore};
use u3e::eval::{evaluate, EvidenceMode, Prediction};
use u3e::pipeline::{
    block_accuracy, build_retrain_corpus, extract_evidence, run_u3e, sweep_max, with_thread_pool, RunConfig,
};
use u3e::scorer::protocol::{serve, StubModel};
use u3e::scorer::{
    load_checkpoints, save_checkpoints, train_epochs, train_epochs_with, Checkpoint, Optimizer, ScoreVector, TrainConfig,
};
use u3e::selection::{EpochAccuracy, Method, SelectionTracker};
use u3e::{Error, Result};

#[derive(Parser)]
#[command(name = "u3e", version, about = "Unsupervised erasure-based evidence extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct TrainArgs {
    #[arg(long, default_value_t = 10)]
    epochs: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value = "adagrad")]
    optimizer: Optimizer,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    #[arg(long, default_value_t = 18)]
    hash_bits: u32,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            seed: self.seed,
            learning_rate: self.lr,
            optimizer: self.optimizer,
            l2: self.l2,
            hash_bits: self.hash_bits,
            ..TrainConfig::default()
        }
    }
}

#[derive(clap::Args, Clone)]
struct BlockArgs {
    #[arg(long, default_value_t = u3e::corpus::DEFAULT_BLOCK_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = u3e::corpus::DEFAULT_BLOCK_STEP)]
    step: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectMethod {
    Bmc,
    Mtest,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Wv,
    Beam,
}

#[derive(Subcommand)]
enum Command {
    /// Train and save one checkpoint per epoch.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Leave-one-out changes of every sample under every checkpoint.
    Changes {
        #[arg(long)]
        ckpts: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Choose a checkpoint by BMC or test accuracy.
    Select {
        #[arg(long, value_enum, default_value = "bmc")]
        method: SelectMethod,
        #[arg(long, default_value_t = u3e::selection::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        changes: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        ckpts: PathBuf,
        /// Training corpus, for the train half of the respective accuracy.
        #[arg(long)]
        train: Option<PathBuf>,
        #[command(flatten)]
        blocks: BlockArgs,
        /// Write the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Top-k evidence from one epoch's change file.
    Extract {
        #[arg(long)]
        changes: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrain on evidence-only documents and report test accuracy.
    Retrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        evidence: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        blocks: BlockArgs,
    },
    /// Full three-stage pipeline from a run configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_cache: bool,
    },
    /// Extract and retrain from every checkpoint, report the best.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Similarity baselines over static word vectors.
    Baseline {
        #[arg(long, value_enum)]
        method: BaselineMethod,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
        beam_width: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer and evidence metrics of a prediction file.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "ans,evi,all")]
        metrics: String,
        #[arg(long, default_value = "sentence")]
        mode: EvidenceMode,
        #[arg(long)]
        json: bool,
    },
    /// Reference scorer speaking the line-delimited JSON protocol on stdio.
    StubScorer {
        /// Constant scores, e.g. "1.0,-1.0".
        #[arg(long, conflicts_with = "mirror", allow_hyphen_values = true)]
        fixed: Option<String>,
        /// Checkpoint file or directory to mirror.
        #[arg(long)]
        mirror: Option<PathBuf>,
    },
}

/// `run`/`sweep` configuration file: corpus path(s) plus run settings.
/// Relative paths resolve against the file's directory.
#[derive(Debug, Serialize, Deserialize)]
struct RunFile {
    corpus: OneOrMany,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(flatten)]
    config: RunConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(PathBuf),
    Many(Vec<PathBuf>),
}

fn load(path: &Path) -> Result<Corpus> {
    load_corpus(path, Format::Jsonl)
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_err(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::io(path, e)
}

fn load_run_file(path: &Path) -> Result<(Corpus, RunConfig, Option<PathBuf>)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: RunFile = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let paths = match file.corpus {
        OneOrMany::One(p) => vec![p],
        OneOrMany::Many(ps) => ps,
    };
    let parts = paths
        .iter()
        .map(|p| load(&base.join(p)))
        .collect::<Result<Vec<_>>>()?;
    let corpus = Corpus::merge("run", parts)?;
    Ok((corpus, file.config, file.out.map(|o| base.join(o))))
}

fn mirror_checkpoints(path: &Path) -> Result<Vec<Checkpoint>> {
    if path.is_dir() {
        load_checkpoints(path)
    } else {
        Ok(vec![Checkpoint::load(path)?])
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train { corpus, out, train } => {
            let corpus = load(&corpus)?;
            let ckpts = train_epochs(&corpus, &train.config())?;
            save_checkpoints(&out, &ckpts)
        }
        Command::Changes { ckpts, corpus, out } => {
            let corpus = load(&corpus)?;
            let mut store = ChangeStore::new();
            for ckpt in load_checkpoints(&ckpts)? {
                let changes = with_thread_pool(|| changes_matrix(&ckpt, &corpus.samples, ckpt.epoch))??;
                store.insert(ckpt.epoch, changes);
            }
            store.save_dir(&out)
        }
        Command::Select {
            method,
            lambda,
            k,
            changes,
            test,
            ckpts,
            train,
            blocks,
            json,
        } => {
            let store = ChangeStore::load_dir(&changes)?;
            let test = load(&test)?;
            let train = train.as_deref().map(load).transpose()?;
            let method = match method {
                SelectMethod::Bmc => Method::Bmc,
                SelectMethod::Mtest => Method::Mtest,
            };
            let mut tracker = SelectionTracker::new(method, k, lambda);
            for ckpt in load_checkpoints(&ckpts)? {
                let acc = with_thread_pool(|| -> Result<EpochAccuracy> {
                    Ok(EpochAccuracy {
                        epoch: ckpt.epoch,
                        test: block_accuracy(&ckpt, &test.samples, blocks.window, blocks.step)?,
                        train: train
                            .as_ref()
                            .map(|t| block_accuracy(&ckpt, &t.samples, blocks.window, blocks.step))
                            .transpose()?,
                    })
                })??;
                let changes = store.get(ckpt.epoch);
                if method == Method::Bmc && changes.is_none() {
                    return Err(Error::EpochMismatch(format!("no change file for epoch {}", ckpt.epoch)));
                }
                tracker.push(acc, changes)?;
            }
            let report = tracker.finish()?;
            if json {
                write_json(None, &report)
            } else {
                print!("{}", report.render_table());
                Ok(())
            }
        }
        Command::Extract { changes, k, out } => {
            if k == 0 {
                return Err(Error::InvalidArgument("k must be >= 1".into()));
            }
            let evidences: Vec<EvidenceSet> = load_changes(&changes)?.iter().map(|c| extract_evidence(c, k)).collect();
            write_jsonl(&out, &evidences)
        }
        Command::Retrain {
            corpus,
            evidence,
            test,
            out,
            train,
            blocks,
        } => {
            let corpus = load(&corpus)?;
            let file = std::fs::File::open(&evidence).map_err(|e| io_err(&evidence, e))?;
            let evidences: Vec<EvidenceSet> = read_jsonl(std::io::BufReader::new(file), &evidence)?;
            let test = load(&test)?;
            let retrain = build_retrain_corpus(&corpus, &evidences)?;
            let mut ckpts = Vec::new();
            let model = train_epochs_with(&retrain, &train.config(), |c| {
                if out.is_some() {
                    ckpts.push(c.clone());
                }
                Ok(())
            })?;
            if let Some(dir) = &out {
                save_checkpoints(dir, &ckpts)?;
            }
            let acc = with_thread_pool(|| block_accuracy(&model, &test.samples, blocks.window, blocks.step))??;
            write_json(None, &serde_json::json!({ "retrain_accuracy": acc }))
        }
        Command::Run { config, out, no_cache } => {
            let (corpus, mut run, file_out) = load_run_file(&config)?;
            run.no_cache |= no_cache;
            let result = with_thread_pool(|| run_u3e(&corpus, &run))??;
            let t = &result.timings;
            log::info!(
                "stages: train-and-acquire {:?}, select-and-reacquire {:?}, apply-and-retrain {:?}",
                t.train_and_acquire,
                t.select_and_reacquire,
                t.apply_and_retrain
            );
            eprint!("{}", result.selection.render_table());
            write_json(out.or(file_out).as_deref(), &result)
        }
        Command::Sweep { config, out } => {
            let (corpus, run, file_out) = load_run_file(&config)?;
            let result = with_thread_pool(|| sweep_max(&corpus, &run))??;
            for r in &result.per_epoch {
                eprintln!(
                    "epoch {:>3}{} retrain acc {:.4}",
                    r.selection.chosen_epoch,
                    if r.selection.chosen_epoch == result.best_epoch { "*" } else { " " },
                    r.retrain_accuracy
                );
            }
            write_json(out.or(file_out).as_deref(), &result)
        }
        Command::Baseline {
            method,
            embeddings,
            k,
            corpus,
            beam_width,
            out,
        } => {
            if k == 0 {
                return Err(Error::InvalidArgument("k must be >= 1".into()));
            }
            let table = load_embeddings(&embeddings)?;
            let corpus = load(&corpus)?;
            let evidences: Vec<EvidenceSet> = corpus
                .samples
                .iter()
                .map(|s| match method {
                    BaselineMethod::Wv => wv_topk(s, &table, k),
                    BaselineMethod::Beam => beam_search_hard_mask(s, &table, k, beam_width),
                })
                .collect();
            match out {
                Some(path) => write_jsonl(path, &evidences),
                None => {
                    let mut stdout = std::io::stdout().lock();
                    for e in &evidences {
                        serde_json::to_writer(&mut stdout, e)?;
                        writeln!(stdout).map_err(|e| io_err(Path::new("<stdout>"), e))?;
                    }
                    Ok(())
                }
            }
        }
        Command::Eval {
            pred,
            gold,
            metrics,
            mode,
            json,
        } => {
            let file = std::fs::File::open(&pred).map_err(|e| io_err(&pred, e))?;
            let predictions: Vec<Prediction> = read_jsonl(std::io::BufReader::new(file), &pred)?;
            let gold = load(&gold)?;
            let report = evaluate(&predictions, &gold, mode)?;
            let wanted: Vec<&str> = metrics.split(',').map(str::trim).collect();
            if let Some(bad) = wanted.iter().find(|m| !["ans", "evi", "all"].contains(m)) {
                return Err(Error::InvalidArgument(format!("unknown metric `{bad}`")));
            }
            let mut obj = serde_json::Map::new();
            obj.insert("n".into(), report.n.into());
            if wanted.contains(&"ans") {
                obj.insert("ans_f1".into(), report.ans_f1.into());
            }
            if wanted.contains(&"evi") {
                obj.insert("evi_f1".into(), serde_json::to_value(report.evi_f1)?);
                obj.insert("evi_mode".into(), serde_json::to_value(report.evi_mode)?);
            }
            if wanted.contains(&"all") {
                obj.insert("all_f1".into(), serde_json::to_value(report.all_f1)?);
                obj.insert("all_f1_rule".into(), report.all_f1_rule.clone().into());
            }
            if json {
                write_json(None, &obj)
            } else {
                print!("{}", report.render_table());
                Ok(())
            }
        }
        Command::StubScorer { fixed, mirror } => {
            let mut model = match (fixed, mirror) {
                (Some(spec), None) => {
                    let values = spec
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| Error::InvalidArgument(format!("--fixed: {e}")))?;
                    match values.as_slice() {
                        [a, b] => StubModel::Fixed(ScoreVector::new(*a, *b)),
                        _ => return Err(Error::InvalidArgument("--fixed takes two scores".into())),
                    }
                }
                (None, Some(path)) => StubModel::mirror(mirror_checkpoints(&path)?),
                _ => return Err(Error::InvalidArgument("pass exactly one of --fixed or --mirror".into())),
            };
            let stdin = std::io::stdin().lock();
            let stdout = std::io::stdout().lock();
            serve(stdin, stdout, &mut model).map_err(|e| io_err(Path::new("<stdio>"), e))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
