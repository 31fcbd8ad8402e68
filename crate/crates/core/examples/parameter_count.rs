//! Trainable parameter counts for the language-model configurations.
//!
//!     cargo run --example parameter_count

use mrnn::cells::{parameter_count, CellKind, MixtureDims};
use mrnn::mixture::Similarity;
use mrnn::model::language_model_description;

fn main() {
    let mixture = |bucketed| MixtureDims {
        m: 16,
        n: 10,
        buckets: 20,
        bucketed,
        similarity: Similarity::Cosine,
    };
    println!("{:<10} {:>8} {:>8} {:>10} {:>10} {:>10}", "model", "cell", "mixture", "head", "network", "embedding");
    for (label, mix) in [("lstm", None), ("m-lstm", Some(mixture(false))), ("pm-lstm", Some(mixture(true)))] {
        let c = parameter_count(&language_model_description(CellKind::Lstm, 128, 32, 10_000, mix));
        println!(
            "{label:<10} {:>8} {:>8} {:>10} {:>10} {:>10}",
            c.cell,
            c.mixture,
            c.head,
            c.network(),
            c.embedding
        );
    }
}
