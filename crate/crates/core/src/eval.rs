//! Accuracy and evidence metrics.
//!
//! `ALL_F1` here is the per-sample product rule: a sample scores its
//! evidence F1 when its answer is right and 0 otherwise, averaged over the
//! samples that carry gold evidence.

use std::collections::HashMap;
use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sample};
use crate::error::{Error, Result};
use crate::text::metric_tokens;

pub const ALL_F1_RULE: &str = "mean(answer_correct * evidence_f1)";

pub fn accuracy(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("accuracy over zero samples".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceMode {
    /// F1 over the multiset of characters (CJK) or whitespace tokens.
    Token,
    /// Set F1 over sentence indices.
    #[default]
    Sentence,
}

impl std::str::FromStr for EvidenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(EvidenceMode::Token),
            "sentence" => Ok(EvidenceMode::Sentence),
            other => Err(Error::InvalidArgument(format!("unknown evidence mode `{other}`"))),
        }
    }
}

fn f1(overlap: usize, predicted: usize, gold: usize) -> f64 {
    if overlap == 0 || predicted == 0 || gold == 0 {
        return 0.0;
    }
    let p = overlap as f64 / predicted as f64;
    let r = overlap as f64 / gold as f64;
    2.0 * p * r / (p + r)
}

/// Multiset token F1 between two evidence strings.
pub fn token_f1(predicted: &str, gold: &str) -> f64 {
    let pred = metric_tokens(predicted);
    let gold = metric_tokens(gold);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &gold {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut overlap = 0;
    for t in &pred {
        if let Some(c) = counts.get_mut(t.as_str()).filter(|c| **c > 0) {
            *c -= 1;
            overlap += 1;
        }
    }
    f1(overlap, pred.len(), gold.len())
}

/// Set F1 between two lists of sentence indices.
pub fn sentence_f1(predicted: &[usize], gold: &[usize]) -> f64 {
    let mut p = predicted.to_vec();
    p.sort_unstable();
    p.dedup();
    let mut g = gold.to_vec();
    g.sort_unstable();
    g.dedup();
    let overlap = p.iter().filter(|i| g.binary_search(i).is_ok()).count();
    f1(overlap, p.len(), g.len())
}

/// Mean of `answer_correct * evidence_f1` over aligned samples.
pub fn all_f1(ans_correct: &[bool], evi_f1: &[f64]) -> Result<f64> {
    if ans_correct.len() != evi_f1.len() {
        return Err(Error::InvalidArgument(format!(
            "{} answers for {} evidence scores",
            ans_correct.len(),
            evi_f1.len()
        )));
    }
    if ans_correct.is_empty() {
        return Err(Error::InvalidArgument("ALL_F1 over zero samples".into()));
    }
    let total: f64 = ans_correct
        .iter()
        .zip(evi_f1)
        .map(|(&ok, &f)| if ok { f } else { 0.0 })
        .sum();
    Ok(total / ans_correct.len() as f64)
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub answer: u8,
    #[serde(default)]
    pub evidence: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub acc: f64,
    pub respective_acc: Option<(f64, f64)>,
    pub ans_f1: f64,
    /// Absent when no gold sample carries evidence.
    pub evi_f1: Option<f64>,
    pub all_f1: Option<f64>,
    pub evi_mode: EvidenceMode,
    pub n_with_evidence: usize,
    pub all_f1_rule: String,
}

impl MetricsReport {
    pub fn render_table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{:.3}", 100.0 * v));
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:>10}", "metric", "value");
        let _ = writeln!(out, "{:<16} {:>10}", "n", self.n);
        let _ = writeln!(out, "{:<16} {:>10}", "ANS_F1", pct(Some(self.ans_f1)));
        let _ = writeln!(out, "{:<16} {:>10}", "EVI_F1", pct(self.evi_f1));
        let _ = writeln!(out, "{:<16} {:>10}", "ALL_F1", pct(self.all_f1));
        if let Some((train, test)) = self.respective_acc {
            let _ = writeln!(out, "{:<16} {:>10}", "Respective Acc", format!("{:.2} / {:.2}", 100.0 * train, 100.0 * test));
        }
        let _ = writeln!(out, "ALL_F1 rule: {}", self.all_f1_rule);
        out
    }
}

fn joined(sample: &Sample, indices: &[usize]) -> String {
    indices
        .iter()
        .filter_map(|&j| sample.sentences.get(j.wrapping_sub(1)))
        .cloned()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Scores predictions against gold samples, matched by id. A gold sample
/// with no prediction counts as a wrong answer with empty evidence.
pub fn evaluate(predictions: &[Prediction], gold: &Corpus, mode: EvidenceMode) -> Result<MetricsReport> {
    if gold.is_empty() {
        return Err(Error::InvalidArgument("gold corpus is empty".into()));
    }
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut answers = Vec::with_capacity(gold.len());
    let mut labels = Vec::with_capacity(gold.len());
    let mut ans_correct = Vec::new();
    let mut evi = Vec::new();
    for sample in &gold.samples {
        let pred = by_id.get(sample.id.as_str()).copied();
        if pred.is_none() {
            warn!("no prediction for `{}`", sample.id);
        }
        let answer = pred.map(|p| p.answer);
        // a missing prediction can never match
        answers.push(answer.unwrap_or(u8::MAX));
        labels.push(sample.label);
        if sample.gold_evidence.is_empty() {
            continue;
        }
        let score = match (pred, mode) {
            (None, _) => 0.0,
            (Some(p), EvidenceMode::Sentence) => sentence_f1(&p.evidence, &sample.gold_evidence),
            (Some(p), EvidenceMode::Token) => {
                let text = p.evidence_text.clone().unwrap_or_else(|| joined(sample, &p.evidence));
                token_f1(&text, &joined(sample, &sample.gold_evidence))
            }
        };
        ans_correct.push(answer == Some(sample.label));
        evi.push(score);
    }
    let acc = accuracy(&answers, &labels)?;
    let (evi_f1, all) = if evi.is_empty() {
        (None, None)
    } else {
        (Some(evi.iter().sum::<f64>() / evi.len() as f64), Some(all_f1(&ans_correct, &evi)?))
    };
    Ok(MetricsReport {
        n: gold.len(),
        acc,
        respective_acc: None,
        ans_f1: acc,
        evi_f1,
        all_f1: all,
        evi_mode: mode,
        n_with_evidence: evi.len(),
        all_f1_rule: ALL_F1_RULE.to_string(),
    })
}
