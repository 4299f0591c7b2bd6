//! The L1 penalty zeroes single parameters, the L2,1 penalty zeroes whole
//! features. Irrelevant features are pruned first.
//!
//! cargo run --release --example regularization_sweep

use lsplm::{evaluate, gen_synthetic, train, Dataset, Hyperparams, Instance, ParallelCtx, Pattern, SparseVector, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// XOR data padded with `extra` uniform noise features.
fn padded(n: usize, extra: u32, seed: u64) -> lsplm::Result<Dataset> {
    let base = gen_synthetic(&SynthSpec { n, noise: 0.1, pattern: Pattern::Xor, seed })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    let instances = base
        .instances
        .into_iter()
        .map(|inst| {
            let mut x = inst.features.entries().to_vec();
            x.extend((0..extra).map(|k| (3 + k, rng.gen_range(-1.0..1.0))));
            SparseVector::from_pairs(x).map(|x| Instance::new(x, inst.label))
        })
        .collect::<lsplm::Result<_>>()?;
    Ok(Dataset::new(instances))
}

fn main() -> lsplm::Result<()> {
    let train_set = padded(2000, 20, 1)?;
    let valid = padded(1000, 20, 2)?;
    let ctx = ParallelCtx::new(&train_set.ungrouped(), 16, 4)?;

    println!("{:>6} {:>6} {:>8} {:>10} {:>12}", "beta", "lambda", "auc", "nnz_params", "nnz_features");
    for (beta, lambda) in [(0.0, 0.0), (1.0, 0.0), (10.0, 0.0), (0.0, 1.0), (0.0, 10.0), (1.0, 1.0), (10.0, 10.0)] {
        let hyper = Hyperparams { m: 4, beta, lambda, ..Default::default() };
        let (theta, _) = train(&ctx, &hyper)?;
        let r = evaluate(&theta, &valid)?;
        println!(
            "{beta:>6} {lambda:>6} {:>8.4} {:>10} {:>12}",
            r.auc.unwrap_or(f64::NAN),
            r.nnz_params,
            r.nnz_features
        );
    }
    Ok(())
}
