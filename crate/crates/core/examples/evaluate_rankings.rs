//! Scores hand-written rankings against annotations.

use textmetric::data::{Annotation, AnnotationSet};
use textmetric::evaluation::{evaluate, Rankings};

fn main() -> textmetric::Result<()> {
    let ids = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let mut rankings = Rankings::new();
    rankings.insert("a", ids(&["b", "c", "d", "e"]));
    rankings.insert("b", ids(&["e", "d", "a", "c"]));
    let annotations = AnnotationSet {
        entries: vec![
            Annotation {
                source_id: "a".into(),
                similar_ids: ids(&["b", "d"]),
            },
            Annotation {
                source_id: "b".into(),
                similar_ids: ids(&["c"]),
            },
        ],
    };
    let report = evaluate(&rankings, &annotations, &[1, 2])?;
    print!("{}", report.to_csv());
    Ok(())
}
