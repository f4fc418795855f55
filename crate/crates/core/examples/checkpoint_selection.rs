//! Comparing checkpoint-selection strategies on one synthetic corpus:
//! BMC (salient changes penalized by test accuracy), MTEST (best test
//! accuracy) and MAX (retrain from every epoch, keep the best).
//!
//!     cargo run --release --example checkpoint_selection

use u3e::pipeline::{apply_and_retrain, reacquire, sweep_max, train_and_acquire, with_thread_pool, RunConfig};
use u3e::selection::Method;
use u3e::synth::{generate, Family, SynthConfig};

fn main() -> u3e::Result<()> {
    run()
}

pub fn run() -> u3e::Result<()> {
    let corpus = generate(&SynthConfig::new(Family::NoisyDistractor, 150, 60, 5))?;
    let config = RunConfig {
        k: 1,
        ..RunConfig::default()
    };

    with_thread_pool(|| -> u3e::Result<()> {
        let acquired = train_and_acquire(&corpus, &config)?;
        for method in [Method::Bmc, Method::Mtest] {
            let report = acquired.select(method, config.k, config.lambda)?;
            let changes = reacquire(&acquired, report.chosen_epoch, false)?;
            let (_, acc) = apply_and_retrain(&acquired, &changes, &config)?;
            println!("{method:?}");
            print!("{}", report.render_table());
            println!("retrain accuracy from epoch {}: {acc:.3}\n", report.chosen_epoch);
        }

        let sweep = sweep_max(&corpus, &config)?;
        for r in &sweep.per_epoch {
            println!("max sweep: epoch {:>2} retrain accuracy {:.3}", r.selection.chosen_epoch, r.retrain_accuracy);
        }
        println!("max: epoch {} ({:.3})", sweep.best_epoch, sweep.best().retrain_accuracy);
        Ok(())
    })?
}
