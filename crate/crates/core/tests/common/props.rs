//! Property bodies and their input strategies. `properties.rs` drives them
//! through `proptest!`, the acceptance harness through a `TestRunner`.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{oracle_changes, Counting, TableScorer};
use u3e::corpus::{blocks, prefilter_topn, read_jsonl, segment, write_jsonl, Corpus, Sample, Split};
use u3e::baselines::EmbeddingTable;
use u3e::erasure::{changes, ChangeStore, ChangeVector};
use u3e::eval::{accuracy, all_f1, sentence_f1};
use u3e::pipeline::extract_evidence;
use u3e::scorer::Scorer;
use u3e::selection::{bmc_select, salient_change, EpochAccuracy};
use u3e::text::token_len;

type Check = Result<(), TestCaseError>;

fn vectors(values: Vec<Vec<f64>>) -> Vec<ChangeVector> {
    values
        .into_iter()
        .enumerate()
        .map(|(i, values)| ChangeVector {
            sample_id: format!("s{i}"),
            epoch: 1,
            values,
        })
        .collect()
}

pub fn change_sets(min: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(min..100.0f64, 1..12), 1..20)
}

pub fn sc_in_unit_interval(sets: Vec<Vec<f64>>, k: usize) -> Check {
    let sc = salient_change(&vectors(sets), k).unwrap();
    prop_assert!((0.0..=1.0).contains(&sc));
    Ok(())
}

pub fn sc_monotone_in_k(sets: Vec<Vec<f64>>, k: usize) -> Check {
    let v = vectors(sets);
    prop_assert!(salient_change(&v, k).unwrap() <= salient_change(&v, k + 1).unwrap());
    Ok(())
}

/// Needs strictly positive changes: a zero-mass sample contributes 0.
pub fn sc_is_one_at_max_m(sets: Vec<Vec<f64>>) -> Check {
    let m = sets.iter().map(Vec::len).max().unwrap();
    let sc = salient_change(&vectors(sets), m).unwrap();
    prop_assert!((sc - 1.0).abs() < 1e-12, "sc = {}", sc);
    Ok(())
}

/// Power-of-two factors keep the scaling exact.
pub fn sc_invariant_under_scaling(sets: Vec<Vec<f64>>, exps: Vec<i32>, k: usize) -> Check {
    let base = salient_change(&vectors(sets.clone()), k).unwrap();
    let scaled: Vec<Vec<f64>> = sets
        .into_iter()
        .zip(exps.iter().cycle())
        .map(|(v, e)| v.into_iter().map(|x| x * 2f64.powi(*e)).collect())
        .collect();
    prop_assert_eq!(salient_change(&vectors(scaled), k).unwrap(), base);
    Ok(())
}

pub fn bmc_rows() -> impl Strategy<Value = Vec<(f64, Vec<f64>)>> {
    prop::collection::vec((0.2..0.8f64, prop::collection::vec(0.0..10.0f64, 3)), 2..8)
}

pub fn bmc_invariant_under_acc_shift(rows: Vec<(f64, Vec<f64>)>, shift: f64, lambda: f64) -> Check {
    let choose = |delta: f64| {
        let mut store = ChangeStore::new();
        let mut accs = Vec::new();
        for (i, (acc, values)) in rows.iter().enumerate() {
            let epoch = i as u32 + 1;
            store.insert(
                epoch,
                vec![ChangeVector {
                    sample_id: "a".into(),
                    epoch,
                    values: values.clone(),
                }],
            );
            accs.push(EpochAccuracy {
                epoch,
                test: acc + delta,
                train: None,
            });
        }
        bmc_select(&accs, &store, 1, lambda).unwrap()
    };
    let a = choose(0.0);
    let b = choose(shift);
    let scores: Vec<f64> = a.rows.iter().map(|r| r.bmc_score.unwrap()).collect();
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Rounding may reorder scores that tie to within an ulp.
    if scores.iter().filter(|s| best - **s < 1e-9).count() > 1 {
        return Ok(());
    }
    prop_assert_eq!(a.chosen_epoch, b.chosen_epoch);
    Ok(())
}

/// Small integer changes, so ties are common.
pub fn evidence_inputs() -> impl Strategy<Value = (Vec<u8>, usize)> {
    (prop::collection::vec(0u8..4, 1..15), 1usize..18)
}

pub fn extract_evidence_contracts(values: Vec<u8>, k: usize) -> Check {
    let cv = ChangeVector {
        sample_id: "x".into(),
        epoch: 1,
        values: values.iter().map(|&v| v as f64).collect(),
    };
    let ev = extract_evidence(&cv, k);
    let m = values.len();
    prop_assert_eq!(ev.indices.len(), k.min(m));
    prop_assert!(ev.indices.windows(2).all(|w| w[0] < w[1]));
    prop_assert!(ev.indices.iter().all(|&j| (1..=m).contains(&j)));

    // Oracle: repeatedly take the earliest maximum.
    let mut left: Vec<(usize, u8)> = values.iter().cloned().enumerate().collect();
    let mut want = Vec::new();
    for _ in 0..k.min(m) {
        let best = left.iter().map(|(_, v)| *v).max().unwrap();
        let pos = left.iter().position(|(_, v)| *v == best).unwrap();
        want.push(left.remove(pos).0 + 1);
    }
    want.sort_unstable();
    prop_assert_eq!(ev.indices, want);
    Ok(())
}

pub fn sentences() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[a-e]{1,3}", 1..10)
}

pub fn changes_use_m_plus_one_calls(sentences: Vec<String>, label: u8) -> Check {
    let table: Vec<(String, [f64; 2])> = ["a", "b", "c", "ab", "abc"]
        .iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), [i as f64 - 1.5, 0.5 * i as f64]))
        .collect();
    let scorer = Counting::new(TableScorer(table.clone()));
    let sample = Sample::new("p", "o", sentences.clone(), label);
    let got = changes(&scorer, &sample, 1).unwrap();
    prop_assert_eq!(scorer.calls(), sentences.len() + 1);

    let oracle = TableScorer(table);
    let want = oracle_changes(|d| oracle.predict("o", d).unwrap().class(label), &sentences);
    prop_assert_eq!(got.values.len(), want.len());
    for (a, b) in got.values.iter().zip(&want) {
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(*a >= 0.0 && a.is_finite());
    }
    Ok(())
}

pub fn blocks_cover_every_sentence(lens: Vec<usize>, step: usize, extra: usize) -> Check {
    let window = step + extra;
    let sentences: Vec<String> = lens.iter().map(|&n| vec!["w"; n].join(" ")).collect();
    let bs = blocks(&sentences, window, step).unwrap();
    let mut covered = vec![false; sentences.len()];
    for b in &bs {
        prop_assert!(!b.range.is_empty());
        let tokens: usize = b.range.clone().map(|i| token_len(&sentences[i])).sum();
        if b.oversized {
            prop_assert_eq!(b.range.len(), 1);
            prop_assert!(tokens > window);
        } else {
            prop_assert!(tokens <= window);
        }
        for i in b.range.clone() {
            covered[i] = true;
        }
    }
    prop_assert!(covered.iter().all(|c| *c));
    prop_assert!(bs.windows(2).all(|w| w[0].range != w[1].range));
    Ok(())
}

pub fn text_parts() -> impl Strategy<Value = Vec<(String, &'static str)>> {
    prop::collection::vec(
        ("[a-z ]{0,8}", prop::sample::select(vec!["。", "！", "？", "!", "?", ". ", ""])),
        0..12,
    )
}

pub fn segment_partitions_text(parts: Vec<(String, &'static str)>) -> Check {
    let text: String = parts.iter().map(|(a, b)| format!("{a}{b}")).collect();
    let segs = segment(&text);
    let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
    prop_assert_eq!(squash(&segs.concat()), squash(&text));
    prop_assert!(segs.iter().all(|s| !s.is_empty() && s.trim() == s));
    Ok(())
}

pub fn prefilter_inputs() -> impl Strategy<Value = (Vec<String>, usize, usize)> {
    (prop::collection::vec("[a-f]{1,6}", 1..14), 1usize..10, 1usize..40)
}

pub fn prefilter_keeps_ordered_subsequence(sentences: Vec<String>, n: usize, budget: usize) -> Check {
    let mut table = EmbeddingTable::new(8);
    for (i, c) in "abcdef".chars().enumerate() {
        let v: Vec<f64> = (0..8).map(|d| ((i * 3 + d) % 5) as f64 - 2.0).collect();
        table.insert(c.to_string(), v).unwrap();
    }
    let sample = Sample::new("p", "abc", sentences.clone(), 1).with_evidence(vec![1]);
    let out = prefilter_topn(&sample, &table, n, budget).unwrap();
    prop_assert!(!out.kept.is_empty());
    prop_assert!(out.kept.len() <= n.min(sentences.len()));
    prop_assert!(out.kept.windows(2).all(|w| w[0] < w[1]));
    let picked: Vec<String> = out.kept.iter().map(|&j| sentences[j - 1].clone()).collect();
    prop_assert_eq!(&out.sample.sentences, &picked);
    prop_assert_eq!(out.dropped_gold, !out.kept.contains(&1));
    if out.kept.len() > 1 {
        let tokens: usize = picked.iter().map(|s| token_len(s)).sum();
        prop_assert!(tokens <= budget);
    }
    Ok(())
}

pub fn corpus_docs() -> impl Strategy<Value = Vec<(Vec<String>, u8, Vec<usize>)>> {
    prop::collection::vec((sentences(), 0u8..2, prop::collection::vec(1usize..4, 0..3)), 1..10)
}

pub fn jsonl_round_trip(docs: Vec<(Vec<String>, u8, Vec<usize>)>) -> Check {
    let samples: Vec<Sample> = docs
        .into_iter()
        .enumerate()
        .map(|(i, (sents, label, ev))| {
            let ev: Vec<usize> = ev.into_iter().filter(|&j| j <= sents.len()).collect();
            Sample::new(format!("id{i}"), format!("选项{i}"), sents, label)
                .with_split(if i % 2 == 0 { Split::Train } else { Split::Test })
                .with_evidence(ev)
        })
        .collect();
    let corpus = Corpus::new("rt", samples).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    write_jsonl(&path, &corpus.samples).unwrap();
    let file = std::fs::File::open(&path).unwrap();
    let back: Vec<Sample> = read_jsonl(std::io::BufReader::new(file), &path).unwrap();
    prop_assert_eq!(back, corpus.samples);
    Ok(())
}

pub fn metric_rows() -> impl Strategy<Value = Vec<(bool, Vec<usize>, Vec<usize>)>> {
    prop::collection::vec(
        (
            any::<bool>(),
            prop::collection::vec(1usize..6, 1..4),
            prop::collection::vec(1usize..6, 1..4),
        ),
        1..40,
    )
}

pub fn all_f1_bounded(rows: Vec<(bool, Vec<usize>, Vec<usize>)>) -> Check {
    let correct: Vec<bool> = rows.iter().map(|r| r.0).collect();
    let f1s: Vec<f64> = rows.iter().map(|r| sentence_f1(&r.1, &r.2)).collect();
    let labels: Vec<u8> = vec![1; rows.len()];
    let preds: Vec<u8> = correct.iter().map(|&c| u8::from(c)).collect();
    let acc = accuracy(&preds, &labels).unwrap();
    let evi = f1s.iter().sum::<f64>() / f1s.len() as f64;
    let all = all_f1(&correct, &f1s).unwrap();
    prop_assert!(all <= acc.min(evi) + 1e-12);
    prop_assert!(all >= 0.0);
    Ok(())
}
