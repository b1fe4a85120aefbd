//! Splits a category mask into 8-connected instances and drops speckle.

use sfid::decouple::{connected_components, filter_instances};
use sfid::grid::BinaryMask;

fn main() {
    let mask = BinaryMask::from_rows(
        "11000001/\
         11000010/\
         00000000/\
         00110000/\
         00010001",
    );
    let instances = connected_components(&mask, 0);
    for inst in instances.instances() {
        println!(
            "instance {} area {:>2} first pixel {:?}",
            inst.label_id(),
            inst.area(),
            inst.pixels()[0]
        );
    }

    let owner = instances.owner_grid();
    for row in owner.chunks(mask.width()) {
        let line: String = row
            .iter()
            .map(|&id| if id == 0 { '.' } else { char::from_digit(id, 36).unwrap() })
            .collect();
        println!("{line}");
    }

    let kept = filter_instances(&instances, 2);
    println!("min_area 2 keeps {} of {}", kept.len(), instances.len());
}
