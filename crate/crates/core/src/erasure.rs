//! Leave-one-out erasure. Each sentence's importance is the absolute change
//! in the gold-class raw score when that sentence is removed from the
//! document.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_jsonl, write_jsonl, Sample};
use crate::error::{Error, Result};
use crate::scorer::Scorer;

/// Per-sentence importances of one sample under one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeVector {
    #[serde(rename = "id")]
    pub sample_id: String,
    pub epoch: u32,
    #[serde(rename = "changes")]
    pub values: Vec<f64>,
}

/// The document without its `j`-th (1-based) sentence.
pub fn erase(sentences: &[String], j: usize) -> Result<Vec<String>> {
    if j == 0 || j > sentences.len() {
        return Err(Error::InvalidArgument(format!(
            "erase index {j} outside [1, {}]",
            sentences.len()
        )));
    }
    let mut out = Vec::with_capacity(sentences.len() - 1);
    out.extend_from_slice(&sentences[..j - 1]);
    out.extend_from_slice(&sentences[j..]);
    Ok(out)
}

/// `c_j = |R_y - R_y^{-j}|` for every sentence, using `m + 1` predictions.
pub fn changes<S: Scorer + ?Sized>(scorer: &S, sample: &Sample, epoch: u32) -> Result<ChangeVector> {
    let fail = |variant: usize| {
        move |e: Error| Error::Erasure {
            sample: sample.id.clone(),
            variant,
            source: Box::new(e),
        }
    };
    if sample.label > 1 {
        return Err(Error::InvalidSample {
            id: sample.id.clone(),
            reason: format!("label {} outside {{0,1}}", sample.label),
        });
    }
    let y = sample.label;
    let full = scorer.predict(&sample.option, &sample.sentences).map_err(fail(0))?.class(y);
    let mut values = Vec::with_capacity(sample.len());
    for j in 1..=sample.len() {
        let variant = erase(&sample.sentences, j)?;
        let erased = scorer.predict(&sample.option, &variant).map_err(fail(j))?.class(y);
        values.push((full - erased).abs());
    }
    Ok(ChangeVector {
        sample_id: sample.id.clone(),
        epoch,
        values,
    })
}

/// Changes for every sample, order-aligned with `samples`, computed in
/// parallel on the current rayon pool.
pub fn changes_matrix<S: Scorer + ?Sized>(scorer: &S, samples: &[Sample], epoch: u32) -> Result<Vec<ChangeVector>> {
    samples.par_iter().map(|s| changes(scorer, s, epoch)).collect()
}

pub fn changes_matrix_serial<S: Scorer + ?Sized>(
    scorer: &S,
    samples: &[Sample],
    epoch: u32,
) -> Result<Vec<ChangeVector>> {
    samples.iter().map(|s| changes(scorer, s, epoch)).collect()
}

/// Change vectors for every epoch, keyed by epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChangeStore {
    epochs: BTreeMap<u32, Vec<ChangeVector>>,
}

impl ChangeStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, epoch: u32, changes: Vec<ChangeVector>) {
        self.epochs.insert(epoch, changes);
    }

    pub fn get(&self, epoch: u32) -> Option<&[ChangeVector]> {
        self.epochs.get(&epoch).map(Vec::as_slice)
    }

    pub fn epochs(&self) -> impl Iterator<Item = u32> + '_ {
        self.epochs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn file_name(dir: &Path, epoch: u32) -> PathBuf {
        dir.join(format!("epoch-{epoch}.jsonl"))
    }

    /// Writes one `epoch-L.jsonl` per epoch into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (&epoch, changes) in &self.epochs {
            write_jsonl(Self::file_name(dir, epoch), changes)?;
        }
        Ok(())
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut store = ChangeStore::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let Some(epoch) = name
                .strip_prefix("epoch-")
                .and_then(|n| n.strip_suffix(".jsonl"))
                .and_then(|n| n.parse::<u32>().ok())
            else {
                continue;
            };
            let changes = load_changes(&path)?;
            if let Some(bad) = changes.iter().find(|c| c.epoch != epoch) {
                return Err(Error::EpochMismatch(format!(
                    "{} holds epoch {} for sample `{}`",
                    path.display(),
                    bad.epoch,
                    bad.sample_id
                )));
            }
            store.insert(epoch, changes);
        }
        Ok(store)
    }
}

pub fn load_changes(path: impl AsRef<Path>) -> Result<Vec<ChangeVector>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(BufReader::new(file), path)
}
