//! Every example must run to completion.

#[allow(dead_code)]
#[path = "../examples/planted_evidence.rs"]
mod planted_evidence;

#[allow(dead_code)]
#[path = "../examples/baseline_comparison.rs"]
mod baseline_comparison;

#[allow(dead_code)]
#[path = "../examples/erasure_changes.rs"]
mod erasure_changes;

#[allow(dead_code)]
#[path = "../examples/checkpoint_selection.rs"]
mod checkpoint_selection;

#[allow(dead_code)]
#[path = "../examples/corpus_preparation.rs"]
mod corpus_preparation;

#[allow(dead_code)]
#[path = "../examples/evaluate_predictions.rs"]
mod evaluate_predictions;

#[allow(dead_code)]
#[path = "../examples/external_scorer.rs"]
mod external_scorer;

#[test]
fn planted_evidence_runs() {
    planted_evidence::run().expect("planted_evidence example failed");
}

#[test]
fn baseline_comparison_runs() {
    baseline_comparison::run().expect("baseline_comparison example failed");
}

#[test]
fn erasure_changes_runs() {
    erasure_changes::run().expect("erasure_changes example failed");
}

#[test]
fn checkpoint_selection_runs() {
    checkpoint_selection::run().expect("checkpoint_selection example failed");
}

#[test]
fn corpus_preparation_runs() {
    corpus_preparation::run().expect("corpus_preparation example failed");
}

#[test]
fn evaluate_predictions_runs() {
    evaluate_predictions::run().expect("evaluate_predictions example failed");
}

#[test]
fn external_scorer_runs() {
    external_scorer::run().expect("external_scorer example failed");
}
