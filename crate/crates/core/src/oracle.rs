//! Brute-force reference implementations, written straight from the
//! definitions and sharing no code with the production path. Tests compare
//! the two.

use std::collections::{HashSet, VecDeque};

use crate::decouple::{Instance, InstanceSet};
use crate::error::{Error, Result};
use crate::grid::BinaryMask;

/// Breadth-first flood fill from each unvisited foreground pixel, scanning in
/// row-major order.
pub fn oracle_connected_components(mask: &BinaryMask) -> InstanceSet {
    let (h, w) = mask.dims();
    let mut visited = vec![vec![false; w]; h];
    let mut instances = Vec::new();
    for r0 in 0..h {
        for c0 in 0..w {
            if !mask.get(r0, c0) || visited[r0][c0] {
                continue;
            }
            let mut pixels = Vec::new();
            let mut queue = VecDeque::from([(r0, c0)]);
            visited[r0][c0] = true;
            while let Some((r, c)) = queue.pop_front() {
                pixels.push((r, c));
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                        if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if mask.get(nr, nc) && !visited[nr][nc] {
                            visited[nr][nc] = true;
                            queue.push_back((nr, nc));
                        }
                    }
                }
            }
            let id = instances.len() as u32 + 1;
            instances.push(Instance::new(id, 0, pixels).expect("flood fill is non-empty"));
        }
    }
    InstanceSet::new(h, w, 0, instances)
}

/// Change mask by explicit pairwise set intersection over all instance pairs.
pub fn oracle_change_mask(m1: &BinaryMask, m2: &BinaryMask, tau: f64) -> Result<BinaryMask> {
    if m1.dims() != m2.dims() {
        return Err(Error::DimensionMismatch {
            left: m1.dims(),
            right: m2.dims(),
        });
    }
    let as_sets = |m: &BinaryMask| -> Vec<HashSet<(usize, usize)>> {
        oracle_connected_components(m)
            .instances()
            .iter()
            .map(|i| i.pixels().iter().copied().collect())
            .collect()
    };
    let (i1, i2) = (as_sets(m1), as_sets(m2));
    let ratio = |a: &HashSet<(usize, usize)>, b: &HashSet<(usize, usize)>| {
        a.intersection(b).count() as f64 / a.len() as f64
    };

    let mut changed: Vec<&HashSet<(usize, usize)>> = Vec::new();
    for a in &i1 {
        if !i2.iter().any(|b| ratio(a, b) >= tau) {
            changed.push(a);
        }
    }
    for b in &i2 {
        if !i1.iter().any(|a| ratio(b, a) >= tau) {
            changed.push(b);
        }
    }

    let (h, w) = m1.dims();
    let mut out = BinaryMask::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            if changed.iter().any(|s| s.contains(&(r, c))) {
                out.set(r, c, true);
            }
        }
    }
    Ok(out)
}

/// Canonical form of a partition: each component as a sorted pixel list,
/// components sorted. Equal canonical forms mean equal partitions up to label
/// renaming.
pub fn canonical_partition(set: &InstanceSet) -> Vec<Vec<(usize, usize)>> {
    let mut parts: Vec<Vec<(usize, usize)>> = set
        .instances()
        .iter()
        .map(|i| {
            let mut p = i.pixels().to_vec();
            p.sort_unstable();
            p
        })
        .collect();
    parts.sort();
    parts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flood_fill_cases() {
        assert_eq!(oracle_connected_components(&BinaryMask::from_rows("10/01")).len(), 1);
        assert!(oracle_connected_components(&BinaryMask::zeros(3, 3)).is_empty());
        let full = oracle_connected_components(&BinaryMask::from_rows("111/111/111"));
        assert_eq!(full.len(), 1);
        assert_eq!(full.instances()[0].area(), 9);
    }

    #[test]
    fn change_oracle_cases() {
        let m = BinaryMask::from_rows("110/000/011");
        assert!(oracle_change_mask(&m, &m, 0.5).unwrap().is_empty());
        let empty = BinaryMask::zeros(3, 3);
        assert_eq!(oracle_change_mask(&empty, &m, 0.5).unwrap(), m);
        assert!(oracle_change_mask(&empty, &BinaryMask::zeros(2, 3), 0.5).is_err());
    }
}
