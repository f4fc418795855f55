//! Samples, corpora and evidence sets, their JSONL form, sentence
//! segmentation and the document preprocessing steps (similarity prefilter
//! and sliding block windows).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{cosine, sentence_vector, EmbeddingTable};
use crate::error::{Error, Result};
use crate::text::token_len;

/// Default prefilter size; keeps documents near eight sentences.
pub const DEFAULT_PREFILTER_N: usize = 8;
/// Default prefilter length budget (a 512-position encoder minus its three
/// special tokens).
pub const DEFAULT_PREFILTER_BUDGET: usize = 509;
pub const DEFAULT_BLOCK_WINDOW: usize = 512;
pub const DEFAULT_BLOCK_STEP: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

/// One statement/document pair with its support label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    /// The statement, or question and candidate concatenated.
    pub option: String,
    /// Document sentences in original order.
    pub sentences: Vec<String>,
    /// 0 = not supported, 1 = supported.
    pub label: u8,
    /// 1-based gold evidence sentence indices, ascending.
    #[serde(rename = "evidence", default, skip_serializing_if = "Vec::is_empty")]
    pub gold_evidence: Vec<usize>,
    #[serde(default)]
    pub split: Split,
}

impl Sample {
    pub fn new(id: impl Into<String>, option: impl Into<String>, sentences: Vec<String>, label: u8) -> Self {
        Sample {
            id: id.into(),
            option: option.into(),
            sentences,
            label,
            gold_evidence: Vec::new(),
            split: Split::Train,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn with_evidence(mut self, evidence: Vec<usize>) -> Self {
        self.gold_evidence = evidence;
        self
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidSample {
            id: self.id.clone(),
            reason,
        };
        if self.sentences.is_empty() {
            return Err(invalid("document has no sentences".into()));
        }
        if self.label > 1 {
            return Err(invalid(format!("label {} outside {{0,1}}", self.label)));
        }
        if let Some(bad) = self
            .gold_evidence
            .iter()
            .find(|&&j| j == 0 || j > self.sentences.len())
        {
            return Err(invalid(format!(
                "evidence index {bad} outside [1, {}]",
                self.sentences.len()
            )));
        }
        Ok(())
    }
}

/// A multiple-choice item; U3E runs once on the gold candidate only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceItem {
    pub id: String,
    pub question: String,
    pub candidates: Vec<String>,
    /// 0-based index of the correct candidate.
    pub answer: usize,
    pub sentences: Vec<String>,
    #[serde(default)]
    pub evidence: Vec<usize>,
}

impl ChoiceItem {
    /// The supported statement built from the question and gold candidate.
    pub fn gold_sample(&self) -> Result<Sample> {
        let candidate = self.candidates.get(self.answer).ok_or_else(|| Error::InvalidSample {
            id: self.id.clone(),
            reason: format!("answer {} outside {} candidates", self.answer, self.candidates.len()),
        })?;
        let sample = Sample::new(
            self.id.clone(),
            format!("{}{}", self.question, candidate),
            self.sentences.clone(),
            1,
        )
        .with_evidence(self.evidence.clone());
        sample.validate()?;
        Ok(sample)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub samples: Vec<Sample>,
}

impl Corpus {
    /// Builds a corpus, rejecting invalid samples and duplicate ids.
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Corpus {
            name: name.into(),
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, split: Split) -> Corpus {
        Corpus {
            name: self.name.clone(),
            samples: self.samples.iter().filter(|s| s.split == split).cloned().collect(),
        }
    }

    /// Concatenates corpora, keeping the id uniqueness invariant.
    pub fn merge(name: impl Into<String>, parts: impl IntoIterator<Item = Corpus>) -> Result<Corpus> {
        Corpus::new(name, parts.into_iter().flat_map(|c| c.samples).collect())
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        write_jsonl(path, &self.samples)
    }
}

/// Evidence chosen for one sample: 1-based indices in document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSet {
    #[serde(rename = "id")]
    pub sample_id: String,
    #[serde(rename = "evidence")]
    pub indices: Vec<usize>,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
}

/// Reads a corpus from a JSONL file, one sample per line.
pub fn load_corpus(path: impl AsRef<Path>, format: Format) -> Result<Corpus> {
    let path = path.as_ref();
    match format {
        Format::Jsonl => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let samples: Vec<Sample> = read_jsonl(BufReader::new(file), path)?;
            for (i, s) in samples.iter().enumerate() {
                s.validate().map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            }
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Corpus::new(name, samples)
        }
    }
}

/// Parses every non-blank line of `reader` as one `T`.
///
/// Blank lines are skipped but still counted, so reported line numbers match
/// the file.
pub fn read_jsonl<T, R>(reader: R, path: &Path) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: strip_position(&e),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// serde_json appends " at line L column C" relative to the single line being
// parsed; the caller reports the file line instead.
fn strip_position(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    msg.strip_suffix(&suffix).map(str::to_string).unwrap_or(msg)
}

const TERMINALS: &[char] = &['。', '！', '？', '!', '?', '.'];
const CLOSERS: &[char] = &['”', '’', '"', '\'', '」', '』', '》', ')', '）'];

/// Splits raw text into sentences after terminal punctuation, keeping any
/// closing quotes that directly follow it. Segments are trimmed and
/// whitespace-only segments dropped.
pub fn segment(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let decimal_point = c == '.'
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if TERMINALS.contains(&c) && !decimal_point {
            let mut end = i + 1;
            while end < chars.len() && TERMINALS.contains(&chars[end]) {
                end += 1;
            }
            while end < chars.len() && CLOSERS.contains(&chars[end]) {
                end += 1;
            }
            push_segment(&mut out, &chars[start..end]);
            start = end;
            i = end;
        } else {
            i += 1;
        }
    }
    push_segment(&mut out, &chars[start..]);
    out
}

fn push_segment(out: &mut Vec<String>, chars: &[char]) {
    let s: String = chars.iter().collect();
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// Result of [`prefilter_topn`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prefiltered {
    pub sample: Sample,
    /// 1-based indices (in the input document) of the surviving sentences.
    pub kept: Vec<usize>,
    /// Set when at least one gold evidence sentence was filtered out.
    pub dropped_gold: bool,
}

/// Keeps the `n` sentences most similar to the option, then drops the
/// lowest-ranked survivors until the document fits in `budget` tokens.
/// At least one sentence always survives.
pub fn prefilter_topn(sample: &Sample, table: &EmbeddingTable, n: usize, budget: usize) -> Result<Prefiltered> {
    if n == 0 {
        return Err(Error::InvalidArgument("prefilter n must be >= 1".into()));
    }
    let m = sample.len();
    let total: usize = sample.sentences.iter().map(|s| token_len(s)).sum();
    if n >= m && total <= budget {
        return Ok(Prefiltered {
            sample: sample.clone(),
            kept: (1..=m).collect(),
            dropped_gold: false,
        });
    }

    let query = sentence_vector(&sample.option, table);
    let sims: Vec<f64> = sample
        .sentences
        .iter()
        .map(|s| cosine(&sentence_vector(s, table), &query))
        .collect();
    let mut ranked: Vec<usize> = (0..m).collect();
    ranked.sort_by(|&a, &b| sims[b].total_cmp(&sims[a]).then(a.cmp(&b)));
    ranked.truncate(n);

    let mut length: usize = ranked.iter().map(|&i| token_len(&sample.sentences[i])).sum();
    while length > budget && ranked.len() > 1 {
        let dropped = ranked.pop().expect("non-empty");
        length -= token_len(&sample.sentences[dropped]);
    }
    ranked.sort_unstable();

    let kept: Vec<usize> = ranked.iter().map(|i| i + 1).collect();
    let (gold, dropped_gold) = remap_indices(&sample.gold_evidence, &kept);
    let filtered = Sample {
        sentences: ranked.iter().map(|&i| sample.sentences[i].clone()).collect(),
        gold_evidence: gold,
        ..sample.clone()
    };
    Ok(Prefiltered {
        sample: filtered,
        kept,
        dropped_gold,
    })
}

/// Maps 1-based indices into positions within `kept` (itself ascending,
/// 1-based). Returns the remapped indices and whether any were lost.
pub(crate) fn remap_indices(indices: &[usize], kept: &[usize]) -> (Vec<usize>, bool) {
    let mut out = Vec::with_capacity(indices.len());
    let mut lost = false;
    for j in indices {
        match kept.binary_search(j) {
            Ok(pos) => out.push(pos + 1),
            Err(_) => lost = true,
        }
    }
    (out, lost)
}

/// A window of consecutive sentences, as 0-based sentence indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub range: Range<usize>,
    /// The block is a single sentence longer than the window.
    pub oversized: bool,
}

/// Sliding windows of whole sentences over a document.
///
/// Block `t` starts at the sentence containing token offset `t * step` (or
/// the first still-uncovered sentence, whichever comes first) and takes the
/// longest run of whole sentences fitting in `window` tokens. Windows stop
/// once the last sentence is covered; duplicates are skipped.
pub fn blocks(sentences: &[String], window: usize, step: usize) -> Result<Vec<Block>> {
    if step == 0 || window < step {
        return Err(Error::InvalidArgument(format!(
            "block window {window} and step {step} must satisfy window >= step >= 1"
        )));
    }
    let lens: Vec<usize> = sentences.iter().map(|s| token_len(s)).collect();
    let m = lens.len();
    let mut starts = Vec::with_capacity(m);
    let mut acc = 0;
    for &l in &lens {
        starts.push(acc);
        acc += l;
    }

    let mut out: Vec<Block> = Vec::new();
    let mut uncovered = 0;
    let mut t = 0;
    while uncovered < m {
        let offset = t * step;
        // last sentence whose start is <= offset
        let containing = starts.partition_point(|&s| s <= offset).saturating_sub(1);
        let first = containing.min(uncovered);
        let mut end = first + 1;
        let mut used = lens[first];
        while end < m && used + lens[end] <= window {
            used += lens[end];
            end += 1;
        }
        let block = Block {
            range: first..end,
            oversized: lens[first] > window,
        };
        if out.last() != Some(&block) {
            out.push(block);
        }
        uncovered = uncovered.max(end);
        t += 1;
    }
    Ok(out)
}
