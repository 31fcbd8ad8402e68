//! Train briefly, write a checkpoint, load it back and score both copies.
//!
//!     cargo run --release --example checkpoint

use mrnn::cells::{CellKind, MixtureDims};
use mrnn::checkpoint::{emit_checkpoint, load_checkpoint};
use mrnn::data::{generate_synthetic, split_half};
use mrnn::metrics::Metric;
use mrnn::mixture::Similarity;
use mrnn::model::regression_description;
use mrnn::train::{fit, TrainConfig};
use mrnn::Result;

fn main() -> Result<()> {
    let data = generate_synthetic(600, 32)?;
    let (test, train) = split_half(&data, 1);
    let mixture = MixtureDims {
        m: 4,
        n: 3,
        buckets: 3,
        bucketed: true,
        similarity: Similarity::Mahalanobis,
    };
    let desc = regression_description(CellKind::Gru, 8, 1, Some(mixture));
    let config = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let (model, _) = fit(desc, &train, &config, None)?;

    let dir = std::env::temp_dir().join("mrnn-checkpoint-example");
    std::fs::create_dir_all(&dir).map_err(|e| mrnn::Error::io(&dir, e))?;
    let path = dir.join("pm-gru.ckpt");
    emit_checkpoint(&model, &path)?;
    let loaded = load_checkpoint(&path)?;

    for (name, tensor) in loaded.named_tensors() {
        println!("{name:<6} {}", tensor.shape());
    }
    let a = model.evaluate(&test, Metric::Mae)?;
    let b = loaded.evaluate(&test, Metric::Mae)?;
    println!("{}: mae {a} before, {b} after reload (identical: {})", path.display(), a.to_bits() == b.to_bits());
    Ok(())
}
