//! Fuses a semantic map with instance queries, gates by presence and labels
//! each pixel. The second category has a high raw score but low presence, so
//! gating hands the pixel to the first.

use sfid::fusion::{fuse_stack, gate, gate_and_label, InstanceQuery, InstanceQuerySet, PresenceVector};
use sfid::grid::ProbMap;

fn main() -> Result<(), sfid::Error> {
    let semantic = vec![
        ProbMap::from_vec(1, 3, vec![0.6, 0.2, 0.1])?,
        ProbMap::from_vec(1, 3, vec![0.7, 0.1, 0.2])?,
    ];
    // one query for category 0 covering the middle pixel
    let queries = InstanceQuerySet::new(
        1,
        3,
        vec![InstanceQuery::new(ProbMap::from_vec(1, 3, vec![0.0, 1.0, 0.0])?, 0.9, Some(0))?],
    )?;
    let presence = PresenceVector::new(vec![0.9, 0.2])?;

    let fused = fuse_stack(&semantic, &queries)?;
    let gated = gate(&fused, &presence)?;
    for (c, (f, g)) in fused.iter().zip(&gated).enumerate() {
        println!("category {c}: fused {:?} gated {:?}", f.values(), g.values());
    }

    for threshold in [0.0, 0.5] {
        let labels = gate_and_label(&fused, &presence, threshold)?;
        let row: Vec<String> = (0..3)
            .map(|col| labels.get(0, col).map_or("bg".into(), |c| c.to_string()))
            .collect();
        println!("threshold {threshold}: {}", row.join(" "));
    }
    Ok(())
}
