//! Trains a small encoder on a synthetic catalog and prints the loss curve.
//!
//! `cargo run --release --example train_synthetic`

use textmetric::data::{generate_synthetic, SyntheticSpec};
use textmetric::trainer::{train, TrainConfig};

fn main() -> textmetric::Result<()> {
    let corpus = generate_synthetic(&SyntheticSpec::default())?;
    let config = TrainConfig {
        steps: 300,
        ..TrainConfig::default()
    };
    let report = train(&corpus.items, &config)?;
    for (step, b) in report.losses.iter().enumerate().step_by(50) {
        println!("step {step:4}  mlm {:.4}  metric {:.4}  total {:.4}", b.mlm, b.metric, b.total);
    }
    println!("trained {} steps in {:.1}s", report.losses.len(), report.wall_seconds);
    Ok(())
}
