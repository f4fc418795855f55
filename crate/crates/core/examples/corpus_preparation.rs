//! Turning raw passages into samples: sentence segmentation, similarity
//! prefiltering against the option, and sliding blocks for long documents.
//!
//!     cargo run --example corpus_preparation

use u3e::baselines::EmbeddingTable;
use u3e::corpus::{blocks, prefilter_topn, segment, ChoiceItem};

fn main() -> u3e::Result<()> {
    run()
}

pub fn run() -> u3e::Result<()> {
    let passage = "长江是中国最长的河流。它全长约6300公里！沿岸有许多城市，比如武汉和南京。\
                   “黄河被称为母亲河。”人们常这样说。今天的气温是21.5度。";
    let sentences = segment(passage);
    for (i, s) in sentences.iter().enumerate() {
        println!("{:>2}: {s}", i + 1);
    }

    let item = ChoiceItem {
        id: "q1".into(),
        question: "中国最长的河流是".into(),
        candidates: vec!["长江".into(), "黄河".into()],
        answer: 0,
        sentences: sentences.clone(),
        evidence: vec![1],
    };
    let sample = item.gold_sample()?;
    println!("\noption: {}", sample.option);

    let mut table = EmbeddingTable::new(4);
    for (i, c) in "中国长江最河流黄城市气温".chars().enumerate() {
        let v = (0..4).map(|d| (((i + 1) * (d + 3)) % 7) as f64 - 3.0).collect();
        table.insert(c.to_string(), v)?;
    }
    let filtered = prefilter_topn(&sample, &table, 3, 40)?;
    println!(
        "prefilter kept sentences {:?} (gold dropped: {})",
        filtered.kept, filtered.dropped_gold
    );

    for b in blocks(&sentences, 24, 8)? {
        println!("block over sentences {:?}{}", b.range, if b.oversized { " (oversized)" } else { "" });
    }
    Ok(())
}
