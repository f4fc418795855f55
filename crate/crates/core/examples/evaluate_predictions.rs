//! Scoring answers and evidence against gold annotations: accuracy,
//! sentence- and token-level evidence F1, and the combined ALL_F1.
//!
//!     cargo run --example evaluate_predictions

use u3e::corpus::{Corpus, Sample};
use u3e::eval::{evaluate, token_f1, EvidenceMode, Prediction};

fn main() -> u3e::Result<()> {
    run()
}

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

pub fn run() -> u3e::Result<()> {
    let gold = Corpus::new(
        "gold",
        vec![
            Sample::new("a", "o1", s(&["x one", "y two", "z three"]), 1).with_evidence(vec![2]),
            Sample::new("b", "o2", s(&["p", "q", "r", "t"]), 0).with_evidence(vec![1, 3]),
            Sample::new("c", "o3", s(&["m", "n"]), 1),
        ],
    )?;
    let predictions = vec![
        Prediction {
            id: "a".into(),
            answer: 1,
            evidence: vec![2],
            evidence_text: Some("y two".into()),
        },
        Prediction {
            id: "b".into(),
            answer: 1,
            evidence: vec![1, 2],
            evidence_text: Some("p q".into()),
        },
        Prediction {
            id: "c".into(),
            answer: 1,
            evidence: vec![],
            evidence_text: None,
        },
    ];

    let report = evaluate(&predictions, &gold, EvidenceMode::Sentence)?;
    print!("{}", report.render_table());
    println!("token F1 of \"a b x y\" against \"a b z\": {:.4}", token_f1("a b x y", "a b z"));
    Ok(())
}
