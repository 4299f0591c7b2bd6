//! Samples that share most of their features (an ad impression shares the
//! user and context features with its siblings) can be stored as blocks.
//! The shared part of every dot product is then computed once per block.
//!
//! cargo run --release --example common_features

use std::collections::BTreeSet;
use std::time::Instant;

use lsplm::{group_by_common, init_theta, Dataset, Hyperparams, Instance, ParallelCtx, SparseVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> lsplm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // 400 users with 80 profile features each, 40 impressions per user with 8 ad features
    let mut instances = Vec::new();
    for _ in 0..400 {
        let user: Vec<(u32, f64)> = (0..80).map(|k| (k * 5 + rng.gen_range(0..5), 1.0)).collect();
        for _ in 0..40 {
            let mut x = user.clone();
            x.extend((0..8).map(|k| (400 + k * 50 + rng.gen_range(0..50), 1.0)));
            instances.push(Instance::new(SparseVector::from_pairs(x)?, rng.gen_bool(0.1)));
        }
    }
    let data = Dataset::new(instances);
    let user_ids: BTreeSet<u32> = (0..400).collect();
    let grouped = group_by_common(&data, &user_ids);
    println!("{} samples in {} blocks", data.len(), grouped.blocks.len());

    let theta = init_theta(data.dim, &Hyperparams { m: 4, init_scale: 0.05, ..Default::default() });
    for (name, blocks) in [("flat", data.ungrouped()), ("grouped", grouped)] {
        let ctx = ParallelCtx::new(&blocks, 8, 1)?;
        let start = Instant::now();
        let (loss, _) = ctx.eval_loss_grad(&theta)?;
        println!("{name:>8}: loss {loss:.6} in {:.1?}", start.elapsed());
    }
    Ok(())
}
