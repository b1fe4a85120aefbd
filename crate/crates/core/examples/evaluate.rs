//! Scores predictions against ground truth: per-category counts summed over
//! pairs, then the unweighted class average.

use sfid::grid::BinaryMask;
use sfid::metrics::{confusion_counts, ConfusionCounts, EvalReport};

fn main() -> Result<(), sfid::Error> {
    // (category, prediction, truth) for two pairs
    let pairs = [
        [("building", "110/000", "100/100"), ("tree", "000/001", "000/011")],
        [("building", "011/011", "011/010"), ("tree", "000/000", "100/000")],
    ];
    let mut totals = [ConfusionCounts::default(); 2];
    for pair in &pairs {
        for (total, (_, pred, gt)) in totals.iter_mut().zip(pair) {
            *total += confusion_counts(&BinaryMask::from_rows(pred), &BinaryMask::from_rows(gt))?;
        }
    }
    let report = EvalReport::from_counts([("building", totals[0]), ("tree", totals[1])])?;
    print!("{}", report.to_table());
    Ok(())
}
