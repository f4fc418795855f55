//! Leave-one-out erasure on a single sample: train a few epochs, then show
//! how much the gold-class score moves when each sentence is removed, and
//! which sentences become evidence.
//!
//!     cargo run --example erasure_changes

use u3e::corpus::{Corpus, Sample, Split};
use u3e::erasure::changes;
use u3e::pipeline::extract_evidence;
use u3e::scorer::{predict, train_epochs, TrainConfig};

fn main() -> u3e::Result<()> {
    run()
}

fn doc(key: &str, filler: &[&str]) -> Vec<String> {
    let mut sentences: Vec<String> = filler.iter().map(|s| format!("{s}。")).collect();
    sentences.insert(1, format!("评论说这家店{key}。"));
    sentences
}

pub fn run() -> u3e::Result<()> {
    let filler = ["今天下午天气晴朗", "我们沿着河边散步", "路上遇到了老朋友"];
    let samples: Vec<Sample> = (0..40)
        .map(|i| {
            let label = (i % 2) as u8;
            let key = if label == 1 { "很好" } else { "很差" };
            let mut f = filler.to_vec();
            f.rotate_left(i % 3);
            Sample::new(format!("s{i}"), "这家店值得去", doc(key, &f), label)
        })
        .collect();
    let corpus = Corpus::new("toy", samples)?;

    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let ckpts = train_epochs(&corpus, &config)?;
    let last = ckpts.last().expect("three epochs");

    let sample = Sample::new("demo", "这家店值得去", doc("很好", &filler), 1).with_split(Split::Test);
    let scores = predict(last, &sample.option, &sample.sentences)?;
    println!("raw scores {:?}, predicted class {}", scores.0, scores.argmax());

    let cv = changes(last, &sample, last.epoch)?;
    for (j, (s, c)) in sample.sentences.iter().zip(&cv.values).enumerate() {
        println!("  c_{} = {c:8.4}  {s}", j + 1);
    }
    println!("top-1 evidence: {:?}", extract_evidence(&cv, 1).indices);
    println!("top-2 evidence: {:?}", extract_evidence(&cv, 2).indices);
    Ok(())
}
