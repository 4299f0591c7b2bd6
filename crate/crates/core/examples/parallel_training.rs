//! Worker threads evaluate the loss over a fixed list of shards. Partial
//! results are summed in a fixed order, so the model does not depend on the
//! number of workers.
//!
//! cargo run --release --example parallel_training

use std::time::Instant;

use lsplm::{gen_synthetic, train, Hyperparams, ParallelCtx, Pattern, SynthSpec, DEFAULT_SHARDS};

fn main() -> lsplm::Result<()> {
    let data = gen_synthetic(&SynthSpec { n: 50_000, noise: 0.1, pattern: Pattern::Band, seed: 5 })?;
    let base = ParallelCtx::new(&data.ungrouped(), DEFAULT_SHARDS, 1)?;
    let hyper = Hyperparams { m: 6, beta: 0.1, lambda: 0.1, max_iters: 50, ..Default::default() };

    let mut reference = None;
    for workers in [1, 2, 4, 8] {
        let ctx = base.clone().with_workers(workers)?;
        let start = Instant::now();
        let (theta, report) = train(&ctx, &hyper)?;
        let same = reference.get_or_insert_with(|| theta.clone()) == &theta;
        println!(
            "workers={workers} objective={:.6} {:.2?} identical_to_single_worker={same}",
            report.final_objective(),
            start.elapsed()
        );
    }
    Ok(())
}
