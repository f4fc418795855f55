//! Compares U3E against the two similarity baselines on a corpus where every
//! document repeats the option verbatim in one label-irrelevant sentence.
//!
//!     cargo run --release --example baseline_comparison

use u3e::baselines::{beam_search_hard_mask, wv_topk, DEFAULT_BEAM_WIDTH};
use u3e::corpus::{EvidenceSet, Split};
use u3e::pipeline::{run_u3e, with_thread_pool, RunConfig};
use u3e::synth::{embedding_table, generate, planted_recovery, Family, SynthConfig};

fn main() -> u3e::Result<()> {
    run()
}

pub fn run() -> u3e::Result<()> {
    let corpus = generate(&SynthConfig::new(Family::QuerySimilar, 200, 100, 11))?;
    let train = corpus.split(Split::Train);
    let table = embedding_table(32, 3);

    let config = RunConfig {
        k: 1,
        ..RunConfig::default()
    };
    let u3e = with_thread_pool(|| run_u3e(&corpus, &config))??;
    let wv: Vec<EvidenceSet> = train.samples.iter().map(|s| wv_topk(s, &table, 1)).collect();
    let beam: Vec<EvidenceSet> = train
        .samples
        .iter()
        .map(|s| beam_search_hard_mask(s, &table, 1, DEFAULT_BEAM_WIDTH))
        .collect();

    println!("top-1 recovery of the planted sentence");
    println!("  u3e   {:.3}", planted_recovery(&train, &u3e.evidences));
    println!("  wv    {:.3}", planted_recovery(&train, &wv));
    println!("  beam  {:.3}", planted_recovery(&train, &beam));
    Ok(())
}
