//! Hashed character n-gram features over three fields: the option, the
//! document, and document n-grams that also occur in the option.
//!
//! Document n-grams never cross sentence boundaries, so a document's vector
//! is the sum of its sentences' vectors. Erasing a sentence removes exactly
//! that sentence's contribution.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Field tags mixed into the hash ahead of the n-gram bytes.
pub const OPTION_FIELD: u8 = b'o';
pub const DOCUMENT_FIELD: u8 = b'd';
pub const OVERLAP_FIELD: u8 = b'x';

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub hash_bits: u32,
    pub ngram_orders: Vec<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            hash_bits: 18,
            ngram_orders: vec![1, 2],
        }
    }
}

impl FeatureConfig {
    pub fn dim(&self) -> usize {
        1usize << self.hash_bits
    }

    /// Bucket of an n-gram in a field: FNV-1a over `[tag, 0x1f, utf8...]`,
    /// masked to `hash_bits`.
    pub fn bucket(&self, field: u8, ngram: &str) -> u32 {
        let mut bytes = Vec::with_capacity(ngram.len() + 2);
        bytes.push(field);
        bytes.push(0x1f);
        bytes.extend_from_slice(ngram.as_bytes());
        (fnv1a(&bytes) & (self.dim() as u64 - 1)) as u32
    }

    /// Character n-grams of every configured order, whitespace removed.
    pub fn ngrams(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        let mut out = Vec::new();
        for &n in &self.ngram_orders {
            if n == 0 || n > chars.len() {
                continue;
            }
            out.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
        }
        out
    }
}

/// Sparse count vector of dimension `2^hash_bits`: sorted unique indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    pub dim: usize,
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    fn from_buckets(dim: usize, mut buckets: Vec<u32>) -> Self {
        buckets.sort_unstable();
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for b in buckets {
            match entries.last_mut() {
                Some((last, count)) if *last == b => *count += 1.0,
                _ => entries.push((b, 1.0)),
            }
        }
        FeatureVector { dim, entries }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| weights[i as usize] * v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }
}

/// Featurizes an option/document pair.
pub fn featurize(config: &FeatureConfig, option: &str, sentences: &[String]) -> FeatureVector {
    let option_ngrams = config.ngrams(option);
    let option_set: HashSet<&str> = option_ngrams.iter().map(String::as_str).collect();
    let mut buckets: Vec<u32> = option_ngrams.iter().map(|g| config.bucket(OPTION_FIELD, g)).collect();
    for sentence in sentences {
        push_sentence_buckets(config, &option_set, sentence, &mut buckets);
    }
    FeatureVector::from_buckets(config.dim(), buckets)
}

/// The document and overlap features contributed by one sentence.
pub fn sentence_features(config: &FeatureConfig, option: &str, sentence: &str) -> FeatureVector {
    let option_ngrams = config.ngrams(option);
    let option_set: HashSet<&str> = option_ngrams.iter().map(String::as_str).collect();
    let mut buckets = Vec::new();
    push_sentence_buckets(config, &option_set, sentence, &mut buckets);
    FeatureVector::from_buckets(config.dim(), buckets)
}

fn push_sentence_buckets(config: &FeatureConfig, option_set: &HashSet<&str>, sentence: &str, out: &mut Vec<u32>) {
    for g in config.ngrams(sentence) {
        out.push(config.bucket(DOCUMENT_FIELD, &g));
        if option_set.contains(g.as_str()) {
            out.push(config.bucket(OVERLAP_FIELD, &g));
        }
    }
}
