//! The three-stage extraction run:
//!
//! 1. train and acquire: train one checkpoint per epoch and cache each
//!    epoch's erasure changes on the training split;
//! 2. select and reacquire: pick the memory model (BMC or MTEST) and read
//!    its changes back from the cache;
//! 3. apply and retrain: keep the top-k sentences per sample, retrain on
//!    evidence-only documents and evaluate on the untouched test split.
//!
//! Worker parallelism is capped by the `U3E_THREADS` environment variable.
//! Every parallel step collects in input order, so results do not depend on
//! the thread count.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{remap_indices, Corpus, EvidenceSet, Sample, Split, DEFAULT_BLOCK_STEP, DEFAULT_BLOCK_WINDOW};
use crate::erasure::{changes_matrix, ChangeStore, ChangeVector};
use crate::error::{Error, Result};
use crate::scorer::{predict_blocks, train_epochs_with, Checkpoint, Scorer, TrainConfig};
use crate::selection::{EpochAccuracy, Method, SelectionReport, SelectionTracker, DEFAULT_LAMBDA};

pub const THREADS_ENV: &str = "U3E_THREADS";

/// Evidence size for statement verification corpora.
pub const VERIFICATION_K: usize = 2;
/// Evidence size for multiple-choice corpora.
pub const MULTIPLE_CHOICE_K: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub k: usize,
    pub lambda: f64,
    pub method: Method,
    pub block_window: usize,
    pub block_step: usize,
    /// Recompute the selected model's changes instead of reading the cache.
    pub no_cache: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            k: VERIFICATION_K,
            lambda: DEFAULT_LAMBDA,
            method: Method::Bmc,
            block_window: DEFAULT_BLOCK_WINDOW,
            block_step: DEFAULT_BLOCK_STEP,
            no_cache: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument("lambda must be finite".into()));
        }
        if self.block_step == 0 || self.block_window < self.block_step {
            return Err(Error::InvalidArgument("block window must be >= step >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings {
    pub train_and_acquire: Duration,
    pub select_and_reacquire: Duration,
    pub apply_and_retrain: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub selection: SelectionReport,
    pub evidences: Vec<EvidenceSet>,
    pub retrain_accuracy: f64,
    pub full_context_accuracy: f64,
    /// Wall-clock only; left out of the serialized result so result files
    /// are reproducible.
    #[serde(skip)]
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best_epoch: u32,
    pub per_epoch: Vec<PipelineResult>,
}

impl SweepResult {
    pub fn best(&self) -> &PipelineResult {
        self.per_epoch
            .iter()
            .find(|r| r.selection.chosen_epoch == self.best_epoch)
            .expect("best epoch has a result")
    }

    pub fn for_epoch(&self, epoch: u32) -> Option<&PipelineResult> {
        self.per_epoch.iter().find(|r| r.selection.chosen_epoch == epoch)
    }
}

/// Worker count from `U3E_THREADS`, or rayon's default when unset.
pub fn configured_threads() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Runs `f` on a rayon pool sized by `U3E_THREADS`.
pub fn with_thread_pool<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = configured_threads() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Indices of the `k` largest changes, ascending; ties go to the earlier
/// sentence.
pub fn extract_evidence(changes: &ChangeVector, k: usize) -> EvidenceSet {
    debug_assert!(k >= 1, "k must be >= 1");
    let v = &changes.values;
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut indices: Vec<usize> = order.into_iter().take(k).map(|i| i + 1).collect();
    indices.sort_unstable();
    EvidenceSet {
        sample_id: changes.sample_id.clone(),
        indices,
        k,
    }
}

/// Replaces each sample's document by its evidence sentences in document
/// order.
pub fn build_retrain_corpus(corpus: &Corpus, evidences: &[EvidenceSet]) -> Result<Corpus> {
    let by_id: HashMap<&str, &EvidenceSet> = evidences.iter().map(|e| (e.sample_id.as_str(), e)).collect();
    let mut samples = Vec::with_capacity(corpus.len());
    for sample in &corpus.samples {
        let ev = by_id
            .get(sample.id.as_str())
            .ok_or_else(|| Error::MissingEvidence(sample.id.clone()))?;
        let mut kept = ev.indices.clone();
        kept.sort_unstable();
        kept.dedup();
        if kept.is_empty() || kept.iter().any(|&j| j == 0 || j > sample.len()) {
            return Err(Error::InvalidSample {
                id: sample.id.clone(),
                reason: format!("evidence {:?} invalid for {} sentences", ev.indices, sample.len()),
            });
        }
        let (gold, _) = remap_indices(&sample.gold_evidence, &kept);
        samples.push(Sample {
            sentences: kept.iter().map(|&j| sample.sentences[j - 1].clone()).collect(),
            gold_evidence: gold,
            ..sample.clone()
        });
    }
    Corpus::new(format!("{}-evidence", corpus.name), samples)
}

/// Block-mode accuracy of a scorer on `samples`.
pub fn block_accuracy<S: Scorer + ?Sized>(scorer: &S, samples: &[Sample], window: usize, step: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("accuracy over zero samples".into()));
    }
    let predicted: Vec<u8> = samples
        .par_iter()
        .map(|s| predict_blocks(scorer, &s.option, &s.sentences, window, step).map(|r| r.argmax()))
        .collect::<Result<_>>()?;
    let hits = predicted.iter().zip(samples).filter(|(p, s)| **p == s.label).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Output of the train-and-acquire stage.
#[derive(Debug, Clone)]
pub struct Acquired {
    pub checkpoints: Vec<Checkpoint>,
    pub changes: ChangeStore,
    pub accuracies: Vec<EpochAccuracy>,
    pub train: Corpus,
    pub test: Corpus,
}

impl Acquired {
    pub fn checkpoint(&self, epoch: u32) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.epoch == epoch)
    }

    /// Selection over the acquired epochs. MTEST rows also carry SC and BMC
    /// scores for reporting.
    pub fn select(&self, method: Method, k: usize, lambda: f64) -> Result<SelectionReport> {
        let mut tracker = SelectionTracker::new(method, k, lambda);
        for acc in &self.accuracies {
            tracker.push(*acc, self.changes.get(acc.epoch))?;
        }
        tracker.finish()
    }
}

fn split_corpus(corpus: &Corpus) -> Result<(Corpus, Corpus)> {
    let train = corpus.split(Split::Train);
    let test = corpus.split(Split::Test);
    if train.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    if test.is_empty() {
        return Err(Error::InvalidArgument("corpus has no test split".into()));
    }
    Ok((train, test))
}

/// Trains every epoch and caches its changes on the training split.
pub fn train_and_acquire(corpus: &Corpus, config: &RunConfig) -> Result<Acquired> {
    config.validate()?;
    let (train, test) = split_corpus(corpus)?;
    let mut checkpoints = Vec::with_capacity(config.train.epochs as usize);
    let mut store = ChangeStore::new();
    let mut accuracies = Vec::with_capacity(config.train.epochs as usize);
    train_epochs_with(&train, &config.train, |ckpt| {
        let changes = changes_matrix(ckpt, &train.samples, ckpt.epoch)?;
        let acc = EpochAccuracy {
            epoch: ckpt.epoch,
            test: block_accuracy(ckpt, &test.samples, config.block_window, config.block_step)?,
            train: Some(block_accuracy(ckpt, &train.samples, config.block_window, config.block_step)?),
        };
        log::info!("epoch {}: acc_test {:.4} acc_train {:?}", acc.epoch, acc.test, acc.train);
        store.insert(ckpt.epoch, changes);
        accuracies.push(acc);
        checkpoints.push(ckpt.clone());
        Ok(())
    })?;
    Ok(Acquired {
        checkpoints,
        changes: store,
        accuracies,
        train,
        test,
    })
}

/// The selected model's changes: a cache lookup, or a literal recomputation
/// when `recompute` is set.
pub fn reacquire(acquired: &Acquired, epoch: u32, recompute: bool) -> Result<Vec<ChangeVector>> {
    if recompute {
        let ckpt = acquired
            .checkpoint(epoch)
            .ok_or_else(|| Error::EpochMismatch(format!("no checkpoint for epoch {epoch}")))?;
        changes_matrix(ckpt, &acquired.train.samples, epoch)
    } else {
        acquired
            .changes
            .get(epoch)
            .map(<[_]>::to_vec)
            .ok_or_else(|| Error::EpochMismatch(format!("no cached changes for epoch {epoch}")))
    }
}

/// Extracts evidence from `changes`, retrains on evidence-only documents and
/// returns the evidence with the retrained model's test accuracy.
pub fn apply_and_retrain(
    acquired: &Acquired,
    changes: &[ChangeVector],
    config: &RunConfig,
) -> Result<(Vec<EvidenceSet>, f64)> {
    let evidences: Vec<EvidenceSet> = changes.iter().map(|c| extract_evidence(c, config.k)).collect();
    let retrain = build_retrain_corpus(&acquired.train, &evidences)?;
    let model = train_epochs_with(&retrain, &config.train, |_| Ok(()))?;
    let acc = block_accuracy(&model, &acquired.test.samples, config.block_window, config.block_step)?;
    Ok((evidences, acc))
}

fn full_context_accuracy(acquired: &Acquired, config: &RunConfig) -> Result<f64> {
    let last = acquired.checkpoints.last().expect("at least one epoch");
    block_accuracy(last, &acquired.test.samples, config.block_window, config.block_step)
}

/// Runs all three stages with the configured selection method.
pub fn run_u3e(corpus: &Corpus, config: &RunConfig) -> Result<PipelineResult> {
    if config.method == Method::Max {
        return Err(Error::InvalidArgument("use sweep_max for the max method".into()));
    }
    let t0 = Instant::now();
    let acquired = train_and_acquire(corpus, config).map_err(|e| e.in_stage("train-and-acquire"))?;
    let t1 = Instant::now();
    let selection = acquired
        .select(config.method, config.k, config.lambda)
        .map_err(|e| e.in_stage("select-and-reacquire"))?;
    let selected = reacquire(&acquired, selection.chosen_epoch, config.no_cache)
        .map_err(|e| e.in_stage("select-and-reacquire"))?;
    let t2 = Instant::now();
    let (evidences, retrain_accuracy) =
        apply_and_retrain(&acquired, &selected, config).map_err(|e| e.in_stage("apply-and-retrain"))?;
    let full_context_accuracy = full_context_accuracy(&acquired, config).map_err(|e| e.in_stage("apply-and-retrain"))?;
    let t3 = Instant::now();
    Ok(PipelineResult {
        selection,
        evidences,
        retrain_accuracy,
        full_context_accuracy,
        timings: StageTimings {
            train_and_acquire: t1 - t0,
            select_and_reacquire: t2 - t1,
            apply_and_retrain: t3 - t2,
        },
    })
}

/// Extracts and retrains from every checkpoint; the best epoch is the one
/// with the highest retrain test accuracy (earliest on ties).
pub fn sweep_max(corpus: &Corpus, config: &RunConfig) -> Result<SweepResult> {
    let t0 = Instant::now();
    let acquired = train_and_acquire(corpus, config).map_err(|e| e.in_stage("train-and-acquire"))?;
    let base = acquired
        .select(Method::Max, config.k, config.lambda)
        .map_err(|e| e.in_stage("select-and-reacquire"))?;
    let full_context_accuracy = full_context_accuracy(&acquired, config).map_err(|e| e.in_stage("apply-and-retrain"))?;
    let t1 = Instant::now();

    let mut per_epoch = Vec::with_capacity(acquired.checkpoints.len());
    for acc in &acquired.accuracies {
        let t = Instant::now();
        let changes = reacquire(&acquired, acc.epoch, config.no_cache).map_err(|e| e.in_stage("select-and-reacquire"))?;
        let (evidences, retrain_accuracy) =
            apply_and_retrain(&acquired, &changes, config).map_err(|e| e.in_stage("apply-and-retrain"))?;
        per_epoch.push(PipelineResult {
            selection: SelectionReport {
                chosen_epoch: acc.epoch,
                ..base.clone()
            },
            evidences,
            retrain_accuracy,
            full_context_accuracy,
            timings: StageTimings {
                train_and_acquire: t1 - t0,
                select_and_reacquire: Duration::ZERO,
                apply_and_retrain: t.elapsed(),
            },
        });
    }
    let mut best = &per_epoch[0];
    for r in &per_epoch[1..] {
        if r.retrain_accuracy > best.retrain_accuracy {
            best = r;
        }
    }
    Ok(SweepResult {
        best_epoch: best.selection.chosen_epoch,
        per_epoch,
    })
}
