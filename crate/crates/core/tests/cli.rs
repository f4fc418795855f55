mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::u3e_bin;
use serde_json::Value;
use u3e::corpus::Split;
use u3e::synth::{embedding_table, generate, Family, SynthConfig};

fn u3e(args: &[&str], dir: &Path) -> Output {
    Command::new(u3e_bin())
        .args(args)
        .current_dir(dir)
        .env("U3E_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(&SynthConfig::new(Family::Planted, 40, 20, 4)).unwrap();
    corpus.split(Split::Train).save_jsonl(dir.path().join("train.jsonl")).unwrap();
    corpus.split(Split::Test).save_jsonl(dir.path().join("test.jsonl")).unwrap();
    corpus.save_jsonl(dir.path().join("all.jsonl")).unwrap();
    embedding_table(8, 1).save(dir.path().join("vectors.txt")).unwrap();
    dir
}

#[test]
fn staged_commands_chain() {
    let dir = workspace();
    let d = dir.path();
    let train = ["--epochs", "3", "--hash-bits", "12"];

    ok(&u3e(&[&["train", "--corpus", "train.jsonl", "--out", "ckpts"][..], &train].concat(), d));
    for e in 1..=3 {
        assert!(d.join(format!("ckpts/epoch-{e}.json")).exists());
    }

    ok(&u3e(&["changes", "--ckpts", "ckpts", "--corpus", "train.jsonl", "--out", "changes"], d));
    assert!(d.join("changes/epoch-3.jsonl").exists());

    let report: Value = serde_json::from_str(&ok(&u3e(
        &["select", "--changes", "changes", "--test", "test.jsonl", "--ckpts", "ckpts", "--k", "1", "--json"],
        d,
    )))
    .unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    let epoch = report["chosen_epoch"].as_u64().unwrap();

    let changes = format!("changes/epoch-{epoch}.jsonl");
    ok(&u3e(&["extract", "--changes", &changes, "--k", "1", "--out", "evidence.jsonl"], d));
    let evidence = std::fs::read_to_string(d.join("evidence.jsonl")).unwrap();
    assert_eq!(evidence.lines().count(), 40);

    let out: Value = serde_json::from_str(&ok(&u3e(
        &[
            &["retrain", "--corpus", "train.jsonl", "--evidence", "evidence.jsonl", "--test", "test.jsonl"][..],
            &train,
        ]
        .concat(),
        d,
    )))
    .unwrap();
    let acc = out["retrain_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let table = ok(&u3e(&["select", "--method", "mtest", "--changes", "changes", "--test", "test.jsonl", "--ckpts", "ckpts"], d));
    assert!(table.contains('*'));
}

#[test]
fn run_and_sweep_from_config() {
    let dir = workspace();
    let d = dir.path();
    std::fs::write(
        d.join("run.json"),
        r#"{"corpus": "all.jsonl", "out": "result.json", "k": 1, "train": {"epochs": 2, "hash_bits": 12}}"#,
    )
    .unwrap();
    ok(&u3e(&["run", "--config", "run.json"], d));
    let result: Value = serde_json::from_slice(&std::fs::read(d.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["evidences"].as_array().unwrap().len(), 40);
    assert!(result.get("timings").is_none());

    ok(&u3e(&["sweep", "--config", "run.json", "--out", "sweep.json"], d));
    let sweep: Value = serde_json::from_slice(&std::fs::read(d.join("sweep.json")).unwrap()).unwrap();
    let per_epoch = sweep["per_epoch"].as_array().unwrap();
    assert_eq!(per_epoch.len(), 2);
    let best = per_epoch
        .iter()
        .map(|r| r["retrain_accuracy"].as_f64().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let bmc = result["retrain_accuracy"].as_f64().unwrap();
    assert!(best >= bmc);
}

#[test]
fn baselines_and_eval() {
    let dir = workspace();
    let d = dir.path();
    for method in ["wv", "beam"] {
        let out = ok(&u3e(
            &["baseline", "--method", method, "--embeddings", "vectors.txt", "--corpus", "test.jsonl", "--k", "2"],
            d,
        ));
        assert_eq!(out.lines().count(), 20);
        for line in out.lines() {
            let e: Value = serde_json::from_str(line).unwrap();
            assert_eq!(e["evidence"].as_array().unwrap().len(), 2);
        }
    }

    let corpus = u3e::corpus::load_corpus(d.join("test.jsonl"), u3e::corpus::Format::Jsonl).unwrap();
    let preds: Vec<String> = corpus
        .samples
        .iter()
        .map(|s| serde_json::json!({"id": s.id, "answer": s.label, "evidence": s.gold_evidence}).to_string())
        .collect();
    std::fs::write(d.join("pred.jsonl"), preds.join("\n")).unwrap();
    let m: Value = serde_json::from_str(&ok(&u3e(&["eval", "--pred", "pred.jsonl", "--gold", "test.jsonl", "--json"], d))).unwrap();
    assert_eq!(m["ans_f1"], 1.0);
    assert_eq!(m["evi_f1"], 1.0);
    assert_eq!(m["all_f1"], 1.0);
    assert_eq!(m["all_f1_rule"], u3e::eval::ALL_F1_RULE);

    let only: Value = serde_json::from_str(&ok(&u3e(
        &["eval", "--pred", "pred.jsonl", "--gold", "test.jsonl", "--metrics", "ans", "--json"],
        d,
    )))
    .unwrap();
    assert!(only.get("evi_f1").is_none());
}

#[test]
fn errors_are_one_json_line_with_exit_code_one() {
    let dir = workspace();
    let d = dir.path();
    std::fs::write(d.join("bad.jsonl"), "{\"id\": \"a\", \"option\": \"o\", \"sentences\": [\"s\"], \"label\": 1}\n{oops\n").unwrap();
    let out = u3e(&["train", "--corpus", "bad.jsonl", "--out", "x"], d);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().last().unwrap();
    let v: Value = serde_json::from_str(line).unwrap();
    assert!(v["error"].as_str().unwrap().contains("line 2"), "{line}");

    let out = u3e(&["train", "--corpus", "missing.jsonl", "--out", "x"], d);
    assert_eq!(out.status.code(), Some(1));
}
