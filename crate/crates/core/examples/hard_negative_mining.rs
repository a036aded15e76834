//! Picks the hardest in-batch negative for each anchor.

use textmetric::geometry::Embedding;
use textmetric::mining::{mine_hard_negatives, BatchEmbeddings};

fn main() -> textmetric::Result<()> {
    let at = |deg: f64| Embedding::new(vec![deg.to_radians().cos(), deg.to_radians().sin()]);
    // titles and descriptions of four items spread around the circle
    let batch = BatchEmbeddings::new(
        vec![at(0.0), at(30.0), at(100.0), at(200.0)],
        vec![at(10.0), at(45.0), at(120.0), at(190.0)],
        ["a", "b", "c", "d"].map(String::from).to_vec(),
    )?;
    for (i, neg) in mine_hard_negatives(&batch)?.iter().enumerate() {
        println!("{} -> item {} ({:?})", batch.item_ids[i], batch.item_ids[neg.index], neg.role);
    }
    Ok(())
}
