//! Tracks how spread out the embeddings are as training proceeds, for the
//! angular triplet loss and for its cosine-distance counterpart.
//!
//! `cargo run --release --example collapse`

use textmetric::data::{generate_synthetic, SyntheticSpec};
use textmetric::inference::{embed_catalog, median_pairwise_cosine};
use textmetric::trainer::{train, LossVariant, TrainConfig};

fn main() -> textmetric::Result<()> {
    let corpus = generate_synthetic(&SyntheticSpec::default())?;
    println!("steps  variant                 median cosine");
    for steps in [0, 250, 500, 1000] {
        for variant in [LossVariant::TripletHard, LossVariant::TripletCosineMetric] {
            let config = TrainConfig {
                steps,
                loss_variant: variant,
                ..TrainConfig::default()
            };
            let checkpoint = train(&corpus.items, &config)?.checkpoint;
            let embedded = embed_catalog(&corpus.items, &checkpoint)?;
            println!("{steps:5}  {:22}  {:.4}", variant.name(), median_pairwise_cosine(&embedded.items)?);
        }
    }
    Ok(())
}
