//! Writes a probability map, a mask stack and a label map to SFID files, reads
//! them back and prints the on-disk sizes.

use sfid::grid::{BinaryMask, LabelMap, ProbMap};
use sfid::store::{read_tensor, stack_masks, write_tensor, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let dir = tmp.path();

    let map = ProbMap::from_vec(2, 3, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.125])?;
    let masks = [BinaryMask::from_rows("101/010"), BinaryMask::from_rows("000/111")];
    let labels = LabelMap::new(2, 3, 2, vec![0, 1, sfid::grid::BACKGROUND, 1, 0, 0])?;

    let tensors = [
        ("map.sfid", Tensor::from(&map)),
        ("masks.sfid", stack_masks(&masks)?),
        ("labels.sfid", Tensor::from(&labels)),
    ];
    for (name, tensor) in &tensors {
        let path = dir.join(name);
        write_tensor(&path, tensor)?;
        let back = read_tensor(&path)?;
        assert_eq!(&back, tensor);
        println!(
            "{name:<12} {:>4} {:?} {:>3} bytes",
            back.dtype().name(),
            back.shape(),
            std::fs::metadata(&path)?.len()
        );
    }
    Ok(())
}
