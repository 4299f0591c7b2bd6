//! Models are plain text: a header line, then one line per feature with any
//! nonzero parameter. Training data uses `label id:value ...` lines.
//!
//! cargo run --release --example model_io

use lsplm::sparse_data::write_dataset;
use lsplm::{gen_synthetic, load_dataset, load_model, predict, save_model, train, Hyperparams, ParallelCtx, Pattern, SynthSpec};

fn main() -> lsplm::Result<()> {
    let data = gen_synthetic(&SynthSpec { n: 1000, noise: 0.05, pattern: Pattern::Band, seed: 11 })?;
    let mut text = Vec::new();
    write_dataset(&mut text, &data)?;
    println!("first records:\n{}", String::from_utf8_lossy(&text).lines().take(3).collect::<Vec<_>>().join("\n"));
    let data = load_dataset(text.as_slice())?;

    let ctx = ParallelCtx::new(&data.ungrouped(), 8, 2)?;
    let (theta, _) = train(&ctx, &Hyperparams { m: 3, beta: 0.1, lambda: 0.1, ..Default::default() })?;

    let mut file = Vec::new();
    save_model(&theta, &mut file)?;
    println!("\nmodel file:\n{}", String::from_utf8_lossy(&file));
    let restored = load_model(file.as_slice())?;
    assert_eq!(restored, theta);

    let out = predict(&restored, &data.instances[0].features)?;
    println!("p = {:.4}, region weights {:.3?}, region predictions {:.3?}", out.p, out.region_weights, out.region_preds);
    Ok(())
}
