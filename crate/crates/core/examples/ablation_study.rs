//! Trains every loss variant on the same data and compares retrieval quality.
//!
//! `cargo run --release --example ablation_study [steps]`

use textmetric::data::{generate_synthetic, SyntheticSpec};
use textmetric::evaluation::{compare_variants, variants_csv};
use textmetric::trainer::{LossVariant, TrainConfig};

fn main() -> textmetric::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let corpus = generate_synthetic(&SyntheticSpec::default())?;
    let configs: Vec<TrainConfig> = LossVariant::ALL
        .iter()
        .map(|&loss_variant| TrainConfig {
            steps,
            loss_variant,
            ..TrainConfig::default()
        })
        .collect();
    print!("{}", variants_csv(&compare_variants(&corpus.items, &corpus.annotations, &configs)));
    Ok(())
}
