//! Similarity baselines: static word vectors with average pooling, top-k by
//! cosine similarity, and beam search with hard query masking.
//!
//! The hard-masking step is a reconstruction: at each step the residual query
//! keeps only the query tokens that no already-selected sentence contains,
//! and candidates are scored by cosine similarity against that residual.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;

use crate::corpus::{EvidenceSet, Sample};
use crate::error::{Error, Result};
use crate::text::lookup_tokens;

pub const DEFAULT_BEAM_WIDTH: usize = 3;

/// Static word embeddings keyed by token.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    max_token_chars: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            max_token_chars: 1,
        }
    }

    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut table = EmbeddingTable::new(dim);
        for (token, v) in entries {
            table.insert(token, v)?;
        }
        Ok(table)
    }

    /// Inserts or replaces a vector. Returns whether the token already existed.
    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.max_token_chars = self.max_token_chars.max(token.chars().count());
        Ok(self.vectors.insert(token, vector).is_some())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Writes word2vec text format, tokens sorted.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut tokens: Vec<&String> = self.vectors.keys().collect();
        tokens.sort();
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let write = || -> std::io::Result<()> {
            writeln!(w, "{} {}", tokens.len(), self.dim)?;
            for t in tokens {
                write!(w, "{t}")?;
                for x in &self.vectors[t] {
                    write!(w, " {x}")?;
                }
                writeln!(w)?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    /// Lookup tokens for `text` against this vocabulary.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        lookup_tokens(text, self.max_token_chars, |t| self.vectors.contains_key(t))
    }

    fn mean_of<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim];
        let mut n = 0usize;
        for v in tokens.into_iter().filter_map(|t| self.get(t)) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
        if n > 0 {
            sum.iter_mut().for_each(|s| *s /= n as f64);
        }
        sum
    }
}

/// Reads word2vec text format: a "V d" header, then "token v1 .. vd" lines.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .ok_or_else(|| parse_err(1, "missing header"))?;
    let mut fields = header.split_whitespace().map(str::parse::<usize>);
    let (declared, dim) = match (fields.next(), fields.next()) {
        (Some(Ok(v)), Some(Ok(d))) => (v, d),
        _ => return Err(parse_err(1, "header must be \"<vocab> <dim>\"")),
    };

    let mut table = EmbeddingTable::new(dim);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-blank line has a token").to_string();
        let vector = parts
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line_no, &format!("bad value: {e}")))?;
        if vector.len() != dim {
            return Err(parse_err(
                line_no,
                &format!("expected {dim} values for `{token}`, found {}", vector.len()),
            ));
        }
        if table.insert(token.clone(), vector)? {
            warn!("duplicate embedding token `{token}` at line {line_no}; keeping the last");
        }
    }
    if table.len() != declared {
        warn!("embedding header declares {declared} tokens, read {}", table.len());
    }
    Ok(table)
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

/// Average-pooled vector of the in-vocabulary tokens; zero when none are known.
pub fn sentence_vector(sentence: &str, table: &EmbeddingTable) -> Vec<f64> {
    let tokens = table.tokens(sentence);
    table.mean_of(tokens.iter().map(String::as_str))
}

/// Cosine similarity, defined as 0 when either operand is the zero vector.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// The `k` sentences most similar to the option, in document order.
pub fn wv_topk(sample: &Sample, table: &EmbeddingTable, k: usize) -> EvidenceSet {
    let query = sentence_vector(&sample.option, table);
    let sims: Vec<f64> = sample
        .sentences
        .iter()
        .map(|s| cosine(&sentence_vector(s, table), &query))
        .collect();
    let mut order: Vec<usize> = (0..sims.len()).collect();
    order.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    evidence_from(sample, order.into_iter().take(k), k)
}

#[derive(Debug, Clone)]
struct Beam {
    picks: Vec<usize>,
    sorted: Vec<usize>,
    score: f64,
}

/// Iterative selection with hard masking of already-covered query tokens.
///
/// Each beam keeps its own residual query; candidates are ranked by
/// cumulative cosine score, ties going to the lexicographically smallest
/// index set. Beams reaching the same set are merged.
pub fn beam_search_hard_mask(sample: &Sample, table: &EmbeddingTable, k: usize, beam_width: usize) -> EvidenceSet {
    let m = sample.len();
    let steps = k.min(m);
    let beam_width = beam_width.max(1);
    let query_tokens = table.tokens(&sample.option);
    let sentence_tokens: Vec<HashSet<String>> = sample
        .sentences
        .iter()
        .map(|s| table.tokens(s).into_iter().collect())
        .collect();
    let sentence_vecs: Vec<Vec<f64>> = sample.sentences.iter().map(|s| sentence_vector(s, table)).collect();

    let mut beams = vec![Beam {
        picks: Vec::new(),
        sorted: Vec::new(),
        score: 0.0,
    }];
    for _ in 0..steps {
        let mut candidates = Vec::new();
        for beam in &beams {
            let residual = table.mean_of(
                query_tokens
                    .iter()
                    .filter(|t| !beam.picks.iter().any(|&p| sentence_tokens[p].contains(*t)))
                    .map(String::as_str),
            );
            for j in (0..m).filter(|j| !beam.picks.contains(j)) {
                let mut picks = beam.picks.clone();
                picks.push(j);
                let mut sorted = picks.clone();
                sorted.sort_unstable();
                candidates.push(Beam {
                    picks,
                    sorted,
                    score: beam.score + cosine(&sentence_vecs[j], &residual),
                });
            }
        }
        candidates.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.sorted.cmp(&b.sorted))
                .then_with(|| a.picks.cmp(&b.picks))
        });
        let mut seen = HashSet::new();
        candidates.retain(|c| seen.insert(c.sorted.clone()));
        candidates.truncate(beam_width);
        beams = candidates;
    }
    let best = beams.into_iter().next().map(|b| b.picks).unwrap_or_default();
    evidence_from(sample, best.into_iter(), k)
}

fn evidence_from(sample: &Sample, picks: impl Iterator<Item = usize>, k: usize) -> EvidenceSet {
    let mut indices: Vec<usize> = picks.map(|i| i + 1).collect();
    indices.sort_unstable();
    EvidenceSet {
        sample_id: sample.id.clone(),
        indices,
        k,
    }
}
