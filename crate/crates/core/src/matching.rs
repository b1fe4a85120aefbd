//! Bi-temporal instance matching and change-mask assembly, plus the
//! pixel-level baselines used for ablation (label comparison and logit-space
//! distance thresholding).

use serde::{Deserialize, Serialize};

use crate::decouple::{connected_components, filter_instances, Instance, InstanceSet};
use crate::error::{Error, Result};
use crate::grid::{check_dims, BinaryMask, LabelMap, ProbMap};

pub const DEFAULT_TAU_MATCH: f64 = 0.5;
pub const DEFAULT_LOGIT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Minimum fraction of an instance one counterpart must cover for the
    /// instance to count as unchanged. `0 < tau_match <= 1`.
    pub tau_match: f64,
    /// Instances smaller than this are dropped before matching.
    pub min_area: usize,
}

impl MatchConfig {
    pub fn new(tau_match: f64, min_area: usize) -> Result<Self> {
        if !(tau_match > 0.0 && tau_match <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tau_match must lie in (0, 1], got {tau_match}"
            )));
        }
        Ok(Self {
            tau_match,
            min_area,
        })
    }
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            tau_match: DEFAULT_TAU_MATCH,
            min_area: 0,
        }
    }
}

/// Instances without a counterpart at the other time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeCandidateSets {
    pub c_t1: Vec<Instance>,
    pub c_t2: Vec<Instance>,
}

/// Fraction of `a` covered by `b`: `|a ∩ b| / |a|`. Not symmetric.
pub fn overlap_ratio(a: &Instance, b: &Instance) -> f64 {
    let (pa, pb) = (a.pixels(), b.pixels());
    let (mut i, mut j, mut shared) = (0, 0, 0usize);
    while i < pa.len() && j < pb.len() {
        match pa[i].cmp(&pb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared as f64 / a.area() as f64
}

/// Forward and backward checks. An instance is unchanged when a single
/// counterpart covers at least `tau_match` of it; coverage by several
/// counterparts is not summed.
pub fn match_instances(
    i1: &InstanceSet,
    i2: &InstanceSet,
    cfg: &MatchConfig,
) -> Result<ChangeCandidateSets> {
    check_dims(i1.dims(), i2.dims())?;
    if i1.category() != i2.category() {
        return Err(Error::InvalidConfig(format!(
            "cannot match category {} against category {}",
            i1.category(),
            i2.category()
        )));
    }
    Ok(ChangeCandidateSets {
        c_t1: unmatched(i1, i2, cfg.tau_match),
        c_t2: unmatched(i2, i1, cfg.tau_match),
    })
}

/// Members of `from` whose best single counterpart in `against` covers less
/// than `tau` of them.
fn unmatched(from: &InstanceSet, against: &InstanceSet, tau: f64) -> Vec<Instance> {
    let (_, w) = from.dims();
    let owners = against.owner_grid();
    let mut hits = vec![0usize; against.len() + 1];
    let mut touched = Vec::new();
    let mut out = Vec::new();
    for inst in from.instances() {
        for &(r, c) in inst.pixels() {
            let o = owners[r * w + c] as usize;
            if o != 0 {
                if hits[o] == 0 {
                    touched.push(o);
                }
                hits[o] += 1;
            }
        }
        let best = touched.iter().map(|&o| hits[o]).max().unwrap_or(0);
        for o in touched.drain(..) {
            hits[o] = 0;
        }
        if (best as f64 / inst.area() as f64) < tau {
            out.push(inst.clone());
        }
    }
    out
}

/// Union of all candidate instances as a binary mask.
pub fn assemble_change_mask(
    cands: &ChangeCandidateSets,
    height: usize,
    width: usize,
) -> Result<BinaryMask> {
    let mut mask = BinaryMask::zeros(height, width);
    for inst in cands.c_t1.iter().chain(&cands.c_t2) {
        for &(row, col) in inst.pixels() {
            if row >= height || col >= width {
                return Err(Error::OutOfGrid {
                    row,
                    col,
                    height,
                    width,
                });
            }
            mask.set(row, col, true);
        }
    }
    Ok(mask)
}

/// Instance-level change detection for one category's masks at T1 and T2.
pub fn detect_changes_instance(
    m1: &BinaryMask,
    m2: &BinaryMask,
    cfg: &MatchConfig,
) -> Result<BinaryMask> {
    check_dims(m1.dims(), m2.dims())?;
    let i1 = filter_instances(&connected_components(m1, 0), cfg.min_area);
    let i2 = filter_instances(&connected_components(m2, 0), cfg.min_area);
    let cands = match_instances(&i1, &i2, cfg)?;
    assemble_change_mask(&cands, m1.height(), m1.width())
}

/// Pixel-wise mask comparison: set where exactly one of the two label maps
/// assigns `category`.
pub fn detect_changes_pmc(l1: &LabelMap, l2: &LabelMap, category: usize) -> Result<BinaryMask> {
    check_dims(l1.dims(), l2.dims())?;
    let count = l1.categories().min(l2.categories());
    if category >= count {
        return Err(Error::CategoryOutOfRange {
            index: category,
            count,
        });
    }
    let c = category as u32;
    let bits = l1
        .raw()
        .iter()
        .zip(l2.raw())
        .map(|(&a, &b)| (a == c) != (b == c))
        .collect();
    BinaryMask::from_bits(l1.height(), l1.width(), bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

/// Per-pixel distance between two category stacks, before normalization.
pub fn logit_distance(s1: &[ProbMap], s2: &[ProbMap], norm: Norm) -> Result<Vec<f64>> {
    if s1.len() != s2.len() {
        return Err(Error::DepthMismatch {
            depth: s2.len(),
            expected: s1.len(),
        });
    }
    let Some(first) = s1.first() else {
        return Ok(Vec::new());
    };
    for m in s1.iter().chain(s2) {
        check_dims(first.dims(), m.dims())?;
    }
    let mut d = vec![0.0f64; first.values().len()];
    for (a, b) in s1.iter().zip(s2) {
        for ((acc, &x), &y) in d.iter_mut().zip(a.values()).zip(b.values()) {
            let diff = x as f64 - y as f64;
            *acc += match norm {
                Norm::L1 => diff.abs(),
                Norm::L2 => diff * diff,
            };
        }
    }
    if norm == Norm::L2 {
        d.iter_mut().for_each(|v| *v = v.sqrt());
    }
    Ok(d)
}

/// Logit-space distance baseline: the per-pixel distance is divided by its
/// image maximum (zero when the maximum is zero) and thresholded.
pub fn detect_changes_logit(
    s1: &[ProbMap],
    s2: &[ProbMap],
    norm: Norm,
    threshold: f64,
) -> Result<BinaryMask> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "logit threshold must be non-negative, got {threshold}"
        )));
    }
    let (h, w) = s1.first().map_or((0, 0), ProbMap::dims);
    let d = logit_distance(s1, s2, norm)?;
    let max = d.iter().copied().fold(0.0f64, f64::max);
    let bits = d
        .iter()
        .map(|&v| {
            let normalized = if max > 0.0 { v / max } else { 0.0 };
            normalized >= threshold
        })
        .collect();
    BinaryMask::from_bits(h, w, bits)
}
