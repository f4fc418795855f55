//! Fixtures and brute-force oracles shared by the integration tests.
//!
//! The oracles here deliberately avoid the library's feature and selection
//! code: they hash, count, enumerate and sum on their own.

#![allow(dead_code)]

pub mod props;

use std::sync::atomic::{AtomicUsize, Ordering};

use u3e::corpus::Sample;
use u3e::scorer::{Checkpoint, ScoreVector, Scorer};

pub const FIXTURE_BITS: u32 = 8;

pub fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Three samples over unigram features.
pub fn fixture_samples() -> Vec<Sample> {
    vec![
        Sample::new("f1", "ab", strings(&["abc", "de", "ffa"]), 1),
        Sample::new("f2", "xy", strings(&["yz", "q", "xxy", "mn"]), 0),
        Sample::new("f3", "hi", strings(&["hello", "world"]), 1),
    ]
}

/// Dyadic weights, so every sum below is exact in f64.
fn fixture_weight(epoch: u32, class: usize, bucket: usize) -> f64 {
    let r = (bucket * (2 * epoch as usize + 5) + class * 13 + epoch as usize * 3) % 17;
    r as f64 / 8.0 - 1.0
}

/// Checkpoints 1..=3 with unigram features and hand-set weights.
pub fn fixture_checkpoints() -> Vec<Checkpoint> {
    (1..=3)
        .map(|epoch| {
            let dim = 1usize << FIXTURE_BITS;
            Checkpoint {
                epoch,
                seed: 0,
                hash_bits: FIXTURE_BITS,
                ngram_orders: vec![1],
                weights: (0..2).map(|c| (0..dim).map(|i| fixture_weight(epoch, c, i)).collect()).collect(),
                bias: vec![0.25 * epoch as f64, -0.5],
            }
        })
        .collect()
}

/// Test accuracies paired with the fixture checkpoints.
pub const FIXTURE_TEST_ACC: [f64; 3] = [0.5, 0.75, 0.625];

pub fn oracle_fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 14695981039346656037;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(1099511628211);
    }
    h
}

fn oracle_bucket(bits: u32, tag: u8, gram: &str) -> usize {
    let mut bytes = vec![tag, 0x1f];
    bytes.extend(gram.bytes());
    (oracle_fnv(&bytes) % (1u64 << bits)) as usize
}

/// Class score of a unigram checkpoint, by direct counting.
pub fn oracle_unigram_score(ckpt: &Checkpoint, option: &str, sentences: &[String], y: usize) -> f64 {
    assert_eq!(ckpt.ngram_orders, vec![1]);
    let w = &ckpt.weights[y];
    let option_chars: Vec<char> = option.chars().filter(|c| !c.is_whitespace()).collect();
    let mut total = ckpt.bias[y];
    for c in &option_chars {
        total += w[oracle_bucket(ckpt.hash_bits, b'o', &c.to_string())];
    }
    for s in sentences {
        for c in s.chars().filter(|c| !c.is_whitespace()) {
            let g = c.to_string();
            total += w[oracle_bucket(ckpt.hash_bits, b'd', &g)];
            if option_chars.contains(&c) {
                total += w[oracle_bucket(ckpt.hash_bits, b'x', &g)];
            }
        }
    }
    total
}

/// Changes by enumerating every leave-one-out document.
pub fn oracle_changes(score: impl Fn(&[String]) -> f64, sentences: &[String]) -> Vec<f64> {
    let full = score(sentences);
    (0..sentences.len())
        .map(|j| {
            let variant: Vec<String> = sentences
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, s)| s.clone())
                .collect();
            (full - score(&variant)).abs()
        })
        .collect()
}

/// Top-k share of change mass, averaged over samples.
pub fn oracle_sc(changes: &[Vec<f64>], k: usize) -> f64 {
    let mut total = 0.0;
    for c in changes {
        let mass: f64 = c.iter().sum();
        if mass == 0.0 {
            continue;
        }
        let mut sorted = c.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let top: f64 = sorted.iter().take(k).sum();
        total += top / mass;
    }
    total / changes.len() as f64
}

/// Scorer that counts its calls.
pub struct Counting<S> {
    pub inner: S,
    pub calls: AtomicUsize,
}

impl<S> Counting<S> {
    pub fn new(inner: S) -> Self {
        Counting {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<S: Scorer> Scorer for Counting<S> {
    fn predict(&self, option: &str, sentences: &[String]) -> u3e::Result<ScoreVector> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.predict(option, sentences)
    }
}

/// Additive scorer: each distinct sentence string contributes a fixed
/// per-class amount.
pub struct TableScorer(pub Vec<(String, [f64; 2])>);

impl Scorer for TableScorer {
    fn predict(&self, _option: &str, sentences: &[String]) -> u3e::Result<ScoreVector> {
        let mut r = [0.0; 2];
        for s in sentences {
            if let Some((_, v)) = self.0.iter().find(|(k, _)| k == s) {
                r[0] += v[0];
                r[1] += v[1];
            }
        }
        Ok(ScoreVector(r))
    }
}

pub fn u3e_bin() -> &'static str {
    env!("CARGO_BIN_EXE_u3e")
}
