//! More regions help until the data's structure is covered, then the gains
//! flatten out.
//!
//! cargo run --release --example m_sweep

use lsplm::{evaluate, gen_synthetic, train, Hyperparams, ParallelCtx, Pattern, SynthSpec};

fn main() -> lsplm::Result<()> {
    for pattern in [Pattern::Xor, Pattern::Band] {
        let train_set = gen_synthetic(&SynthSpec { n: 10_000, noise: 0.1, pattern, seed: 21 })?;
        let test_set = gen_synthetic(&SynthSpec { n: 2_000, noise: 0.0, pattern, seed: 22 })?;
        let ctx = ParallelCtx::new(&train_set.ungrouped(), 16, 4)?;
        print!("{pattern:?}:");
        for m in [1, 2, 4, 8, 16] {
            let hyper = Hyperparams { m, beta: 0.01, lambda: 0.01, ..Default::default() };
            let (theta, _) = train(&ctx, &hyper)?;
            print!("  m={m} auc={:.4}", evaluate(&theta, &test_set)?.auc.unwrap_or(f64::NAN));
        }
        println!();
    }
    Ok(())
}
