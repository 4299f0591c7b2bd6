//! A single linear region cannot separate XOR; a few regions can.
//!
//! cargo run --release --example xor_nonlinearity

use lsplm::{evaluate, gen_synthetic, train, Hyperparams, ParallelCtx, Pattern, SynthSpec};

fn main() -> lsplm::Result<()> {
    let train_set = gen_synthetic(&SynthSpec { n: 10_000, noise: 0.1, pattern: Pattern::Xor, seed: 7 })?;
    let test_set = gen_synthetic(&SynthSpec { n: 2_000, noise: 0.0, pattern: Pattern::Xor, seed: 8 })?;
    let ctx = ParallelCtx::new(&train_set.ungrouped(), 16, 4)?;

    for m in [1, 2, 4, 8] {
        let hyper = Hyperparams { m, beta: 0.01, lambda: 0.01, ..Default::default() };
        let start = std::time::Instant::now();
        let (theta, report) = train(&ctx, &hyper)?;
        let eval = evaluate(&theta, &test_set)?;
        println!(
            "m={m:<2} auc={:.4} logloss={:.4} iterations={} ({}) {:.1?}",
            eval.auc.unwrap_or(f64::NAN),
            eval.logloss,
            report.iterations.len() - 1,
            report.termination.as_str(),
            start.elapsed()
        );
    }
    Ok(())
}
