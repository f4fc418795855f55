//! End-to-end run on a synthetic corpus where one keyword sentence decides
//! each label. Prints the selection table and how often the extracted
//! evidence is the planted sentence.
//!
//!     cargo run --release --example planted_evidence

use u3e::corpus::Split;
use u3e::pipeline::{run_u3e, with_thread_pool, RunConfig};
use u3e::synth::{generate, planted_recovery, Family, SynthConfig};

fn main() -> u3e::Result<()> {
    run()
}

pub fn run() -> u3e::Result<()> {
    let corpus = generate(&SynthConfig::new(Family::Planted, 200, 100, 7))?;
    let config = RunConfig {
        k: 1,
        ..RunConfig::default()
    };
    let result = with_thread_pool(|| run_u3e(&corpus, &config))??;

    print!("{}", result.selection.render_table());
    let train = corpus.split(Split::Train);
    println!("planted recovery   {:.3}", planted_recovery(&train, &result.evidences));
    println!("retrain accuracy   {:.3}", result.retrain_accuracy);
    println!("full-context acc.  {:.3}", result.full_context_accuracy);
    println!("timings            {:?}", result.timings);
    Ok(())
}
