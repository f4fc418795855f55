//! Seeded synthetic corpora with a known evidence sentence per sample.
//!
//! Each document holds one planted sentence whose keyword decides the label
//! plus 5-9 filler distractors. The planted index is stored as the sample's
//! gold evidence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::EmbeddingTable;
use crate::corpus::{Corpus, Sample, Split};
use crate::error::Result;

const FILLER: &str = "的一是在不了有和人这中大";
const TOPIC: &str = "春夏秋冬山川河湖江海风雨雪云星月日天花草木林森田园";
const NOISE: &str = "甲乙丙丁";
const SUPPORT: &str = "赞优佳";
const REFUTE: &str = "差劣糟";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Keyword sentence among random filler.
    Planted,
    /// Planted, plus one distractor that repeats the option verbatim.
    QuerySimilar,
    /// Planted, with label-independent noise characters sprinkled into
    /// distractors.
    NoisyDistractor,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub family: Family,
    pub n_train: usize,
    pub n_test: usize,
    pub min_distractors: usize,
    pub max_distractors: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(family: Family, n_train: usize, n_test: usize, seed: u64) -> Self {
        SynthConfig {
            family,
            n_train,
            n_test,
            min_distractors: 5,
            max_distractors: 9,
            seed,
        }
    }
}

fn pick(rng: &mut ChaCha8Rng, alphabet: &[char]) -> char {
    *alphabet.choose(rng).expect("non-empty alphabet")
}

fn filler_sentence(rng: &mut ChaCha8Rng, filler: &[char], len: usize) -> String {
    (0..len).map(|_| pick(rng, filler)).collect()
}

/// Generates the corpus: train samples first, then test samples.
pub fn generate(config: &SynthConfig) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let filler: Vec<char> = FILLER.chars().collect();
    let topic: Vec<char> = TOPIC.chars().collect();
    let noise: Vec<char> = NOISE.chars().collect();
    let support: Vec<char> = SUPPORT.chars().collect();
    let refute: Vec<char> = REFUTE.chars().collect();

    let mut samples = Vec::with_capacity(config.n_train + config.n_test);
    for i in 0..config.n_train + config.n_test {
        let split = if i < config.n_train { Split::Train } else { Split::Test };
        let label: u8 = rng.gen_range(0..=1);
        let option: String = (0..4).map(|_| pick(&mut rng, &topic)).collect();
        let n_distractors = rng.gen_range(config.min_distractors..=config.max_distractors);

        let mut sentences: Vec<String> = (0..n_distractors)
            .map(|_| {
                let len = rng.gen_range(6..=10);
                let mut s = filler_sentence(&mut rng, &filler, len);
                if config.family == Family::NoisyDistractor && rng.gen_bool(0.4) {
                    let at = rng.gen_range(0..=len);
                    s.insert(s.char_indices().nth(at).map_or(s.len(), |(b, _)| b), pick(&mut rng, &noise));
                }
                s + "。"
            })
            .collect();
        if config.family == Family::QuerySimilar {
            let at = rng.gen_range(0..=sentences.len());
            sentences.insert(at, format!("{option}。"));
        }

        let keyword = if label == 1 {
            pick(&mut rng, &support)
        } else {
            pick(&mut rng, &refute)
        };
        let len = rng.gen_range(6..=10);
        let mut planted: Vec<char> = filler_sentence(&mut rng, &filler, len).chars().collect();
        let at = rng.gen_range(0..=planted.len());
        planted.insert(at, keyword);
        let planted: String = planted.into_iter().chain(std::iter::once('。')).collect();
        let position = rng.gen_range(0..=sentences.len());
        sentences.insert(position, planted);

        samples.push(
            Sample::new(format!("syn-{i:04}"), option, sentences, label)
                .with_split(split)
                .with_evidence(vec![position + 1]),
        );
    }
    let name = format!("synthetic-{:?}", config.family).to_lowercase();
    Corpus::new(name, samples)
}

/// Random unit-scale vectors for every character the generator can emit.
pub fn embedding_table(dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dim);
    for c in [FILLER, TOPIC, NOISE, SUPPORT, REFUTE].concat().chars() {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        table.insert(c.to_string(), v).expect("dimension matches");
    }
    table
}

/// Fraction of samples whose evidence contains the planted sentence.
pub fn planted_recovery(corpus: &Corpus, evidences: &[crate::corpus::EvidenceSet]) -> f64 {
    let gold: std::collections::HashMap<&str, &[usize]> = corpus
        .samples
        .iter()
        .map(|s| (s.id.as_str(), s.gold_evidence.as_slice()))
        .collect();
    if evidences.is_empty() {
        return 0.0;
    }
    let hits = evidences
        .iter()
        .filter(|e| {
            gold.get(e.sample_id.as_str())
                .is_some_and(|g| g.iter().any(|j| e.indices.contains(j)))
        })
        .count();
    hits as f64 / evidences.len() as f64
}
