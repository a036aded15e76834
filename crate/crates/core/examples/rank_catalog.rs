//! Embeds a catalog with a briefly trained encoder and ranks it for one item.

use textmetric::data::{generate_synthetic, SyntheticSpec};
use textmetric::inference::{embed_catalog, rank};
use textmetric::trainer::{train, TrainConfig};

fn main() -> textmetric::Result<()> {
    let corpus = generate_synthetic(&SyntheticSpec {
        n_clusters: 3,
        items_per_cluster: 8,
        ..SyntheticSpec::default()
    })?;
    let config = TrainConfig {
        steps: 200,
        ..TrainConfig::default()
    };
    let checkpoint = train(&corpus.items, &config)?.checkpoint;
    let embedded = embed_catalog(&corpus.items, &checkpoint)?;

    let source = &corpus.items[0];
    println!("source {}: {}", source.item_id, source.title);
    let cluster_of = |id: &str| corpus.clusters[corpus.items.iter().position(|i| i.item_id == id).unwrap()];
    for (r, c) in rank(&source.item_id, &embedded.items)?.candidates.iter().take(10).enumerate() {
        let same = if cluster_of(&c.item_id) == corpus.clusters[0] { "same cluster" } else { "" };
        println!("{:2}. {}  {:.4}  {same}", r + 1, c.item_id, c.score);
    }
    Ok(())
}
