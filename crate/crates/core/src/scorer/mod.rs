//! The memory model: a linear classifier over hashed n-gram features,
//! trained with SGD and checkpointed after every epoch, plus the abstract
//! [`Scorer`] boundary that external models plug into.
//!
//! Scorers return raw class scores. Nothing that crosses the scorer
//! boundary is softmax-normalized.

mod external;
mod features;
pub mod protocol;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{blocks, Corpus, Split};
use crate::error::{Error, Result};

pub use external::ExternalScorer;
pub use features::{featurize, fnv1a, sentence_features, FeatureConfig, FeatureVector};

pub const NUM_CLASSES: usize = 2;
pub const DEFAULT_EPSILON: f64 = 1e-12;
const ADAGRAD_DELTA: f64 = 1e-8;

/// Raw per-class scores, before any normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(pub [f64; NUM_CLASSES]);

impl ScoreVector {
    pub fn new(not_supported: f64, supported: f64) -> Self {
        ScoreVector([not_supported, supported])
    }

    pub fn class(&self, y: u8) -> f64 {
        self.0[y as usize]
    }

    /// Predicted class; ties resolve to class 0.
    pub fn argmax(&self) -> u8 {
        u8::from(self.0[1] > self.0[0])
    }

    pub fn max(&self, other: &ScoreVector) -> ScoreVector {
        ScoreVector([self.0[0].max(other.0[0]), self.0[1].max(other.0[1])])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

pub fn softmax_probs(r: &ScoreVector) -> [f64; NUM_CLASSES] {
    let max = r.0[0].max(r.0[1]);
    let e = [(r.0[0] - max).exp(), (r.0[1] - max).exp()];
    let z = e[0] + e[1];
    [e[0] / z, e[1] / z]
}

/// `-ln(clamp(p[y], epsilon, 1))`.
pub fn cross_entropy(probs: &[f64; NUM_CLASSES], y: u8, epsilon: f64) -> f64 {
    -probs[y as usize].clamp(epsilon, 1.0).ln()
}

/// Answer loss plus `alpha`-weighted evidence loss.
pub fn combine_losses(l_ans: f64, l_evi: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(l_ans + alpha * l_evi)
}

/// The evidence-loss weights swept in joint training: 0.0, 0.1, ..., 1.0.
pub fn alpha_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// Parameters of the linear model after one training epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: u32,
    pub seed: u64,
    pub hash_bits: u32,
    pub ngram_orders: Vec<usize>,
    /// One row per class, `2^hash_bits` columns.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Checkpoint {
    pub fn zeros(epoch: u32, seed: u64, features: &FeatureConfig) -> Self {
        Checkpoint {
            epoch,
            seed,
            hash_bits: features.hash_bits,
            ngram_orders: features.ngram_orders.clone(),
            weights: vec![vec![0.0; features.dim()]; NUM_CLASSES],
            bias: vec![0.0; NUM_CLASSES],
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            hash_bits: self.hash_bits,
            ngram_orders: self.ngram_orders.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.feature_config().dim();
        if self.weights.len() != NUM_CLASSES {
            return Err(Error::DimensionMismatch {
                expected: NUM_CLASSES,
                actual: self.weights.len(),
            });
        }
        if self.bias.len() != NUM_CLASSES {
            return Err(Error::DimensionMismatch {
                expected: NUM_CLASSES,
                actual: self.bias.len(),
            });
        }
        if let Some(row) = self.weights.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: row.len(),
            });
        }
        Ok(())
    }

    /// `W·f + b` for a precomputed feature vector.
    pub fn scores(&self, features: &FeatureVector) -> Result<ScoreVector> {
        self.validate()?;
        if features.dim != self.weights[0].len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights[0].len(),
                actual: features.dim,
            });
        }
        Ok(self.scores_unchecked(features))
    }

    fn scores_unchecked(&self, f: &FeatureVector) -> ScoreVector {
        ScoreVector([
            f.dot(&self.weights[0]) + self.bias[0],
            f.dot(&self.weights[1]) + self.bias[1],
        ])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}

/// Raw scores of the linear model on an option/document pair.
pub fn predict(ckpt: &Checkpoint, option: &str, sentences: &[String]) -> Result<ScoreVector> {
    ckpt.scores(&featurize(&ckpt.feature_config(), option, sentences))
}

/// Checkpoint file name inside a checkpoint directory.
pub fn checkpoint_file(dir: &Path, epoch: u32) -> PathBuf {
    dir.join(format!("epoch-{epoch}.json"))
}

pub fn save_checkpoints(dir: impl AsRef<Path>, ckpts: &[Checkpoint]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    ckpts.iter().try_for_each(|c| c.save(checkpoint_file(dir, c.epoch)))
}

/// Loads every `epoch-L.json` in `dir`, ordered by epoch.
pub fn load_checkpoints(dir: impl AsRef<Path>) -> Result<Vec<Checkpoint>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("epoch-") && name.ends_with(".json") {
            out.push(Checkpoint::load(&path)?);
        }
    }
    out.sort_by_key(|c| c.epoch);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Fixed step `learning_rate` on every coordinate.
    Sgd,
    /// Per-coordinate step `learning_rate / sqrt(sum of squared gradients)`.
    #[default]
    Adagrad,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adagrad" => Ok(Optimizer::Adagrad),
            other => Err(Error::InvalidArgument(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: u32,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// L2 penalty, applied to the coordinates each sample touches.
    pub l2: f64,
    pub seed: u64,
    pub hash_bits: u32,
    pub ngram_orders: Vec<usize>,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let features = FeatureConfig::default();
        TrainConfig {
            epochs: 10,
            learning_rate: 0.1,
            optimizer: Optimizer::default(),
            l2: 0.0,
            seed: 42,
            hash_bits: features.hash_bits,
            ngram_orders: features.ngram_orders,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl TrainConfig {
    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            hash_bits: self.hash_bits,
            ngram_orders: self.ngram_orders.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidArgument(format!("l2 {} must be non-negative", self.l2)));
        }
        if !(1..=30).contains(&self.hash_bits) {
            return Err(Error::InvalidArgument(format!("hash_bits {} outside [1, 30]", self.hash_bits)));
        }
        Ok(())
    }
}

/// Trains on the corpus's training split and returns one checkpoint per
/// epoch, `1..=config.epochs`.
pub fn train_epochs(corpus: &Corpus, config: &TrainConfig) -> Result<Vec<Checkpoint>> {
    let mut out = Vec::with_capacity(config.epochs as usize);
    train_epochs_with(corpus, config, |ckpt| {
        out.push(ckpt.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Like [`train_epochs`], handing each checkpoint to `on_epoch` as soon as
/// its epoch finishes.
///
/// Per-sample updates on the softmax cross-entropy from zero weights, with
/// one seeded Fisher-Yates shuffle of the sample order per epoch.
pub fn train_epochs_with<F>(corpus: &Corpus, config: &TrainConfig, mut on_epoch: F) -> Result<Checkpoint>
where
    F: FnMut(&Checkpoint) -> Result<()>,
{
    config.validate()?;
    let features = config.features();
    let train: Vec<(FeatureVector, u8)> = corpus
        .samples
        .iter()
        .filter(|s| s.split == Split::Train)
        .map(|s| (featurize(&features, &s.option, &s.sentences), s.label))
        .collect();
    if train.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }

    let mut model = Checkpoint::zeros(0, config.seed, &features);
    let mut accum = match config.optimizer {
        Optimizer::Sgd => None,
        Optimizer::Adagrad => Some(Checkpoint::zeros(0, config.seed, &features)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &i in &order {
            let (f, y) = &train[i];
            let probs = softmax_probs(&model.scores_unchecked(f));
            loss += cross_entropy(&probs, *y, config.epsilon);
            for (c, p) in probs.iter().enumerate() {
                let grad = p - f64::from(c == *y as usize);
                let lr = config.learning_rate;
                let row = &mut model.weights[c];
                match accum.as_mut() {
                    None => {
                        for &(j, v) in &f.entries {
                            let w = &mut row[j as usize];
                            *w -= lr * (grad * v + config.l2 * *w);
                        }
                        model.bias[c] -= lr * grad;
                    }
                    Some(acc) => {
                        let acc_row = &mut acc.weights[c];
                        for &(j, v) in &f.entries {
                            let g = grad * v + config.l2 * row[j as usize];
                            acc_row[j as usize] += g * g;
                            row[j as usize] -= lr * g / (acc_row[j as usize].sqrt() + ADAGRAD_DELTA);
                        }
                        acc.bias[c] += grad * grad;
                        model.bias[c] -= lr * grad / (acc.bias[c].sqrt() + ADAGRAD_DELTA);
                    }
                }
            }
        }
        model.epoch = epoch;
        log::debug!("epoch {epoch}: mean train loss {:.6}", loss / train.len() as f64);
        on_epoch(&model)?;
    }
    Ok(model)
}

/// Mean cross-entropy of a checkpoint over the training split.
pub fn mean_train_loss(ckpt: &Checkpoint, corpus: &Corpus, epsilon: f64) -> Result<f64> {
    let train: Vec<_> = corpus.samples.iter().filter(|s| s.split == Split::Train).collect();
    if train.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    let mut total = 0.0;
    for s in &train {
        total += cross_entropy(&softmax_probs(&predict(ckpt, &s.option, &s.sentences)?), s.label, epsilon);
    }
    Ok(total / train.len() as f64)
}

/// Anything that maps an option/document pair to raw class scores.
pub trait Scorer: Send + Sync {
    fn predict(&self, option: &str, sentences: &[String]) -> Result<ScoreVector>;
}

impl Scorer for Checkpoint {
    fn predict(&self, option: &str, sentences: &[String]) -> Result<ScoreVector> {
        predict(self, option, sentences)
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn predict(&self, option: &str, sentences: &[String]) -> Result<ScoreVector> {
        (**self).predict(option, sentences)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn predict(&self, option: &str, sentences: &[String]) -> Result<ScoreVector> {
        (**self).predict(option, sentences)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    Builtin,
    External,
}

/// Opens a scorer: a checkpoint file for `Builtin`, a command line for
/// `External`.
pub fn scorer_handle(kind: ScorerKind, target: &str) -> Result<Box<dyn Scorer>> {
    match kind {
        ScorerKind::Builtin => Ok(Box::new(Checkpoint::load(target)?)),
        ScorerKind::External => Ok(Box::new(ExternalScorer::spawn(target)?)),
    }
}

/// Scores a long document window by window and takes the elementwise max.
/// An empty document is scored once as-is.
pub fn predict_blocks<S: Scorer + ?Sized>(
    scorer: &S,
    option: &str,
    sentences: &[String],
    window: usize,
    step: usize,
) -> Result<ScoreVector> {
    let windows = blocks(sentences, window, step)?;
    if windows.len() <= 1 {
        return scorer.predict(option, sentences);
    }
    let mut best: Option<ScoreVector> = None;
    for b in windows {
        let r = scorer.predict(option, &sentences[b.range])?;
        best = Some(best.map_or(r, |acc| acc.max(&r)));
    }
    Ok(best.expect("at least two windows"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sample;

    fn tiny(bits: u32) -> FeatureConfig {
        FeatureConfig {
            hash_bits: bits,
            ngram_orders: vec![1],
        }
    }

    #[test]
    fn bias_only_model() {
        let mut c = Checkpoint::zeros(1, 0, &tiny(6));
        c.bias = vec![0.3, -0.3];
        for doc in [vec![], vec!["anything".to_string(), "at all".to_string()]] {
            assert_eq!(predict(&c, "opt", &doc).unwrap(), ScoreVector::new(0.3, -0.3));
        }
    }

    #[test]
    fn hand_dot_product() {
        // 2 classes x 4 buckets, input "ab" with orders {1}: hand-summed.
        let cfg = FeatureConfig {
            hash_bits: 2,
            ngram_orders: vec![1],
        };
        let a = cfg.bucket(features::OPTION_FIELD, "a") as usize;
        let b = cfg.bucket(features::OPTION_FIELD, "b") as usize;
        let mut c = Checkpoint::zeros(1, 0, &cfg);
        c.weights = vec![vec![1.0, 2.0, 3.0, 4.0], vec![-1.0, 0.5, 0.0, 2.0]];
        c.bias = vec![0.25, -0.25];
        let expect0 = c.weights[0][a] + c.weights[0][b] + 0.25;
        let expect1 = c.weights[1][a] + c.weights[1][b] - 0.25;
        let r = predict(&c, "ab", &[]).unwrap();
        assert_eq!(r, ScoreVector::new(expect0, expect1));
    }

    #[test]
    fn dimension_mismatch() {
        let mut c = Checkpoint::zeros(1, 0, &tiny(4));
        c.weights[1].pop();
        assert!(matches!(predict(&c, "a", &[]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn softmax_cases() {
        assert_eq!(softmax_probs(&ScoreVector::new(0.0, 0.0)), [0.5, 0.5]);
        let p = softmax_probs(&ScoreVector::new(3f64.ln(), 0.0));
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
        assert_eq!(softmax_probs(&ScoreVector::new(5.0, 5.0)), softmax_probs(&ScoreVector::new(0.0, 0.0)));
    }

    #[test]
    fn cross_entropy_cases() {
        assert!((cross_entropy(&[0.5, 0.5], 1, DEFAULT_EPSILON) - 2f64.ln()).abs() < 1e-12);
        assert_eq!(cross_entropy(&[0.0, 1.0], 1, DEFAULT_EPSILON), 0.0);
        let clamped = cross_entropy(&[1.0, 0.0], 1, DEFAULT_EPSILON);
        assert!(clamped.is_finite());
        assert!((clamped + DEFAULT_EPSILON.ln()).abs() < 1e-9);
    }

    #[test]
    fn combine_losses_cases() {
        assert_eq!(combine_losses(0.5, 0.25, 0.0).unwrap(), 0.5);
        assert_eq!(combine_losses(0.5, 0.25, 1.0).unwrap(), 0.75);
        assert!(combine_losses(0.5, 0.25, 1.5).is_err());
        assert!(combine_losses(0.5, 0.25, -0.1).is_err());
        let grid = alpha_grid();
        assert_eq!(grid.len(), 11);
        assert_eq!((grid[0], grid[3], grid[10]), (0.0, 0.3, 1.0));
        for a in grid {
            combine_losses(1.0, 1.0, a).unwrap();
        }
    }

    fn toy_corpus() -> Corpus {
        let samples = (0..8)
            .map(|i| {
                let label = (i % 2) as u8;
                let key = if label == 1 { "yes" } else { "no" };
                Sample::new(format!("s{i}"), "q", vec![format!("{key} {i}")], label)
            })
            .collect();
        Corpus::new("toy", samples).unwrap()
    }

    #[test]
    fn train_count_and_epochs() {
        let cfg = TrainConfig {
            epochs: 3,
            hash_bits: 8,
            ..Default::default()
        };
        let ckpts = train_epochs(&toy_corpus(), &cfg).unwrap();
        assert_eq!(ckpts.iter().map(|c| c.epoch).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn train_rejects_empty_split() {
        let mut c = toy_corpus();
        c.samples.iter_mut().for_each(|s| s.split = Split::Test);
        assert!(matches!(train_epochs(&c, &TrainConfig::default()), Err(Error::EmptyTrainingSplit)));
    }

    #[test]
    fn checkpoint_file_round_trip() {
        let cfg = TrainConfig {
            epochs: 2,
            hash_bits: 8,
            ..Default::default()
        };
        let ckpts = train_epochs(&toy_corpus(), &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_checkpoints(dir.path(), &ckpts).unwrap();
        let back = load_checkpoints(dir.path()).unwrap();
        assert_eq!(back, ckpts);
        let handle = scorer_handle(ScorerKind::Builtin, checkpoint_file(dir.path(), 2).to_str().unwrap()).unwrap();
        let doc = vec!["yes 3".to_string()];
        assert_eq!(handle.predict("q", &doc).unwrap(), predict(&ckpts[1], "q", &doc).unwrap());
    }

    #[test]
    fn block_prediction_takes_elementwise_max() {
        let cfg = tiny(8);
        let mut c = Checkpoint::zeros(1, 0, &cfg);
        let bx = cfg.bucket(features::DOCUMENT_FIELD, "x") as usize;
        let by = cfg.bucket(features::DOCUMENT_FIELD, "y") as usize;
        c.weights[0][bx] = 2.0;
        c.weights[1][by] = 3.0;
        let doc = vec!["x".to_string(), "z".to_string(), "y".to_string()];
        // window 1, step 1 -> three single-sentence windows
        let r = predict_blocks(&c, "", &doc, 1, 1).unwrap();
        assert_eq!(r, ScoreVector::new(2.0, 3.0));
    }
}
