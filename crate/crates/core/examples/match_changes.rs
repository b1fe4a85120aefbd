//! Bi-temporal matching at several thresholds. The T1 block is half covered
//! by a shifted T2 block, so it survives a low threshold and turns into a
//! change at a high one.

use sfid::grid::{BinaryMask, LabelMap};
use sfid::matching::{detect_changes_instance, detect_changes_pmc, MatchConfig};

fn show(mask: &BinaryMask) -> String {
    mask.bits()
        .chunks(mask.width())
        .map(|r| r.iter().map(|&b| if b { '#' } else { '.' }).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
}

fn main() -> Result<(), sfid::Error> {
    let t1 = BinaryMask::from_rows("1100000/1100000/0000000/0000011");
    let t2 = BinaryMask::from_rows("0110000/0110000/0000000/0000000");

    for tau in [0.25, 0.5, 0.75] {
        let change = detect_changes_instance(&t1, &t2, &MatchConfig::new(tau, 0)?)?;
        println!("tau {tau}:\n{}\n", show(&change));
    }

    let labels = |m: &BinaryMask| {
        let raw = m.bits().iter().map(|&b| if b { 0 } else { sfid::grid::BACKGROUND }).collect();
        LabelMap::new(m.height(), m.width(), 1, raw)
    };
    let pmc = detect_changes_pmc(&labels(&t1)?, &labels(&t2)?, 0)?;
    println!("pixel comparison:\n{}", show(&pmc));
    Ok(())
}
