//! Instance decoupling: splits a category mask into its 8-connected regions.

use crate::grid::BinaryMask;

/// A connected region of one category.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    label_id: u32,
    category: usize,
    /// Row-major sorted, no duplicates.
    pixels: Vec<(usize, usize)>,
}

impl Instance {
    /// Builds an instance from arbitrary pixels (sorted and deduplicated
    /// here). Returns `None` for an empty pixel list. Connectivity is not
    /// checked; [`connected_components`] is the usual source of instances.
    pub fn new(label_id: u32, category: usize, mut pixels: Vec<(usize, usize)>) -> Option<Self> {
        if pixels.is_empty() {
            return None;
        }
        pixels.sort_unstable();
        pixels.dedup();
        Some(Self {
            label_id,
            category,
            pixels,
        })
    }

    pub fn label_id(&self) -> u32 {
        self.label_id
    }

    pub fn category(&self) -> usize {
        self.category
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn pixels(&self) -> &[(usize, usize)] {
        &self.pixels
    }
}

/// The instances extracted from one mask, in label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSet {
    height: usize,
    width: usize,
    category: usize,
    instances: Vec<Instance>,
}

impl InstanceSet {
    pub fn new(height: usize, width: usize, category: usize, instances: Vec<Instance>) -> Self {
        Self {
            height,
            width,
            category,
            instances,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn category(&self) -> usize {
        self.category
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn into_instances(self) -> Vec<Instance> {
        self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Dense owner map: `0` for uncovered pixels, otherwise the 1-based
    /// position of the owning instance in [`instances`](Self::instances).
    /// Out-of-grid pixels are skipped.
    pub fn owner_grid(&self) -> Vec<u32> {
        let mut grid = vec![0u32; self.height * self.width];
        for (i, inst) in self.instances.iter().enumerate() {
            for &(r, c) in &inst.pixels {
                if r < self.height && c < self.width {
                    grid[r * self.width + c] = i as u32 + 1;
                }
            }
        }
        grid
    }
}

/// Labels the 8-connected foreground regions of `mask`.
///
/// Two-pass union-find. Label ids run 1, 2, ... in row-major order of each
/// region's first pixel, independent of how provisional labels merged.
pub fn connected_components(mask: &BinaryMask, category: usize) -> InstanceSet {
    let (h, w) = mask.dims();
    let bits = mask.bits();
    let mut provisional = vec![0u32; h * w];
    let mut forest = DisjointSets::default();

    for r in 0..h {
        for c in 0..w {
            let idx = r * w + c;
            if !bits[idx] {
                continue;
            }
            // already-visited neighbours: W, NW, N, NE
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            if c > 0 && provisional[idx - 1] != 0 {
                neighbours[n] = provisional[idx - 1];
                n += 1;
            }
            if r > 0 {
                let up = idx - w;
                if c > 0 && provisional[up - 1] != 0 {
                    neighbours[n] = provisional[up - 1];
                    n += 1;
                }
                if provisional[up] != 0 {
                    neighbours[n] = provisional[up];
                    n += 1;
                }
                if c + 1 < w && provisional[up + 1] != 0 {
                    neighbours[n] = provisional[up + 1];
                    n += 1;
                }
            }
            provisional[idx] = if n == 0 {
                forest.make_set()
            } else {
                let first = neighbours[0];
                for &other in &neighbours[1..n] {
                    forest.union(first, other);
                }
                first
            };
        }
    }

    // Second pass: final ids in order of first appearance.
    let mut final_id = vec![0u32; forest.len() + 1];
    let mut pixels: Vec<Vec<(usize, usize)>> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let p = provisional[r * w + c];
            if p == 0 {
                continue;
            }
            let root = forest.find(p) as usize;
            if final_id[root] == 0 {
                pixels.push(Vec::new());
                final_id[root] = pixels.len() as u32;
            }
            pixels[final_id[root] as usize - 1].push((r, c));
        }
    }

    let instances = pixels
        .into_iter()
        .enumerate()
        .map(|(i, px)| Instance {
            label_id: i as u32 + 1,
            category,
            pixels: px,
        })
        .collect();
    InstanceSet::new(h, w, category, instances)
}

/// Keeps instances with `area >= min_area`; label ids are preserved.
pub fn filter_instances(set: &InstanceSet, min_area: usize) -> InstanceSet {
    InstanceSet {
        instances: set
            .instances
            .iter()
            .filter(|i| i.area() >= min_area)
            .cloned()
            .collect(),
        ..*set
    }
}

/// Union-find over labels `1..=len`; slot 0 is unused.
#[derive(Debug)]
struct DisjointSets {
    parent: Vec<u32>,
}

impl Default for DisjointSets {
    fn default() -> Self {
        Self { parent: vec![0] }
    }
}

impl DisjointSets {
    fn len(&self) -> usize {
        self.parent.len() - 1
    }

    fn make_set(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grandparent = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grandparent;
            x = grandparent;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn areas(set: &InstanceSet) -> Vec<usize> {
        set.instances().iter().map(Instance::area).collect()
    }

    #[test]
    fn diagonal_pixels_connect() {
        let set = connected_components(&BinaryMask::from_rows("10/01"), 0);
        assert_eq!(areas(&set), vec![2]);
    }

    #[test]
    fn isolated_corners_stay_apart() {
        let set = connected_components(&BinaryMask::from_rows("101/000/101"), 0);
        assert_eq!(areas(&set), vec![1, 1, 1, 1]);
        let ids: Vec<u32> = set.instances().iter().map(Instance::label_id).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);
        assert_eq!(set.instances()[1].pixels(), &[(0, 2)]);
    }

    #[test]
    fn empty_and_full_masks() {
        assert!(connected_components(&BinaryMask::zeros(5, 5), 0).is_empty());
        let set = connected_components(&BinaryMask::from_rows("111/111/111"), 2);
        assert_eq!(areas(&set), vec![9]);
        assert_eq!(set.instances()[0].category(), 2);
    }

    #[test]
    fn late_merge_keeps_first_pixel_order() {
        // a "U" shape: two arms merge on the last row; a second blob starts
        // between the arms' first pixels in scan order
        let mask = BinaryMask::from_rows("10101/10001/11111");
        let set = connected_components(&mask, 0);
        assert_eq!(areas(&set), vec![9, 1]);
        assert_eq!(set.instances()[0].pixels()[0], (0, 0));
        assert_eq!(set.instances()[1].pixels(), &[(0, 2)]);
    }

    #[test]
    fn anti_diagonal_chain() {
        let set = connected_components(&BinaryMask::from_rows("001/010/100"), 0);
        assert_eq!(areas(&set), vec![3]);
    }

    #[test]
    fn filter_cases() {
        let set = connected_components(&BinaryMask::from_rows("10011/00011/00001"), 0);
        assert_eq!(areas(&set), vec![1, 5]);
        assert_eq!(filter_instances(&set, 0), set);
        let kept = filter_instances(&set, 2);
        assert_eq!(areas(&kept), vec![5]);
        assert_eq!(kept.instances()[0].label_id(), 2);
        assert!(filter_instances(&set, 6).is_empty());
    }

    #[test]
    fn instance_new_normalizes() {
        assert!(Instance::new(1, 0, vec![]).is_none());
        let i = Instance::new(1, 0, vec![(1, 0), (0, 1), (1, 0)]).unwrap();
        assert_eq!(i.pixels(), &[(0, 1), (1, 0)]);
        assert_eq!(i.area(), 2);
    }
}
