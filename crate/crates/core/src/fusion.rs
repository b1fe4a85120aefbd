//! Synergistic mask fusion: instance queries are collapsed into a per-pixel
//! peak response, max-fused with the semantic map, recalibrated by the
//! image-level presence score and labeled by argmax.

use crate::error::{Error, Result};
use crate::grid::{check_dims, BinaryMask, LabelMap, ProbMap, BACKGROUND};

/// One decoder proposal: a spatial probability map and its confidence.
///
/// `category` ties the query to a vocabulary entry; `None` means the query is
/// shared by every category.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceQuery {
    pub map: ProbMap,
    pub confidence: f32,
    pub category: Option<usize>,
}

impl InstanceQuery {
    pub fn new(map: ProbMap, confidence: f32, category: Option<usize>) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::NotProbability(confidence as f64));
        }
        Ok(Self {
            map,
            confidence,
            category,
        })
    }

    pub fn applies_to(&self, category: usize) -> bool {
        self.category.is_none_or(|c| c == category)
    }
}

/// All instance queries emitted for one image. May be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceQuerySet {
    height: usize,
    width: usize,
    queries: Vec<InstanceQuery>,
}

impl InstanceQuerySet {
    pub fn new(height: usize, width: usize, queries: Vec<InstanceQuery>) -> Result<Self> {
        for q in &queries {
            check_dims((height, width), q.map.dims())?;
        }
        Ok(Self {
            height,
            width,
            queries,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            queries: Vec::new(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, InstanceQuery> {
        self.queries.iter()
    }

    /// Queries that contribute to `category`.
    pub fn for_category(&self, category: usize) -> impl Iterator<Item = &InstanceQuery> {
        self.queries.iter().filter(move |q| q.applies_to(category))
    }
}

impl<'a> IntoIterator for &'a InstanceQuerySet {
    type Item = &'a InstanceQuery;
    type IntoIter = std::slice::Iter<'a, InstanceQuery>;

    fn into_iter(self) -> Self::IntoIter {
        self.queries.iter()
    }
}

/// Image-level existence score per vocabulary entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PresenceVector(Vec<f32>);

impl PresenceVector {
    pub fn new(scores: Vec<f32>) -> Result<Self> {
        if let Some(&bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::NotProbability(bad as f64));
        }
        Ok(Self(scores))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scores(&self) -> &[f32] {
        &self.0
    }
}

/// Peak confidence-weighted response over all queries at each pixel. An empty
/// query set yields the all-zero map.
pub fn aggregate_instances<'a, I>(queries: I, height: usize, width: usize) -> Result<ProbMap>
where
    I: IntoIterator<Item = &'a InstanceQuery>,
{
    let mut out = vec![0.0f32; height * width];
    for q in queries {
        check_dims((height, width), q.map.dims())?;
        let s = q.confidence;
        for (o, &p) in out.iter_mut().zip(q.map.values()) {
            let v = p * s;
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(ProbMap::from_vec_unchecked(height, width, out))
}

/// Pixel-wise maximum of the semantic and aggregated instance maps.
pub fn fuse_semantic_instance(sem: &ProbMap, agg: &ProbMap) -> Result<ProbMap> {
    check_dims(sem.dims(), agg.dims())?;
    let values = sem
        .values()
        .iter()
        .zip(agg.values())
        .map(|(&a, &b)| a.max(b))
        .collect();
    Ok(ProbMap::from_vec_unchecked(sem.height(), sem.width(), values))
}

/// Multiplies each category's fused map by its presence score.
pub fn gate(fused: &[ProbMap], presence: &PresenceVector) -> Result<Vec<ProbMap>> {
    check_stack(fused, presence)?;
    Ok(fused
        .iter()
        .zip(presence.scores())
        .map(|(map, &s)| {
            let values = map.values().iter().map(|&p| p * s).collect();
            ProbMap::from_vec_unchecked(map.height(), map.width(), values)
        })
        .collect())
}

/// Gates every category by its presence score and assigns each pixel the
/// category with the highest gated probability.
///
/// Pixels whose best gated probability falls below `background_threshold`
/// become background. Ties go to the lowest category index. Gated values are
/// compared as exact products of the two `f32` factors.
pub fn gate_and_label(
    fused: &[ProbMap],
    presence: &PresenceVector,
    background_threshold: f64,
) -> Result<LabelMap> {
    check_stack(fused, presence)?;
    if !(0.0..=1.0).contains(&background_threshold) {
        return Err(Error::NotProbability(background_threshold));
    }
    let (h, w) = fused.first().map_or((0, 0), ProbMap::dims);
    let mut labels = vec![BACKGROUND; h * w];
    let mut best = vec![f64::NEG_INFINITY; h * w];
    for (c, (map, &s)) in fused.iter().zip(presence.scores()).enumerate() {
        let s = s as f64;
        for ((label, top), &p) in labels.iter_mut().zip(best.iter_mut()).zip(map.values()) {
            let g = p as f64 * s;
            if g > *top {
                *top = g;
                *label = c as u32;
            }
        }
    }
    for (label, &top) in labels.iter_mut().zip(&best) {
        if top < background_threshold {
            *label = BACKGROUND;
        }
    }
    LabelMap::new(h, w, fused.len(), labels)
}

/// Binary mask of the pixels labeled `category`.
pub fn binarize_category(labels: &LabelMap, category: usize) -> Result<BinaryMask> {
    if category >= labels.categories() {
        return Err(Error::CategoryOutOfRange {
            index: category,
            count: labels.categories(),
        });
    }
    let c = category as u32;
    let bits = labels.raw().iter().map(|&l| l == c).collect();
    BinaryMask::from_bits(labels.height(), labels.width(), bits)
}

/// Runs aggregation and max-fusion for every category of one image.
pub fn fuse_stack(semantic: &[ProbMap], queries: &InstanceQuerySet) -> Result<Vec<ProbMap>> {
    semantic
        .iter()
        .enumerate()
        .map(|(c, sem)| {
            let agg = aggregate_instances(queries.for_category(c), sem.height(), sem.width())?;
            fuse_semantic_instance(sem, &agg)
        })
        .collect()
}

fn check_stack(fused: &[ProbMap], presence: &PresenceVector) -> Result<()> {
    if fused.len() != presence.len() {
        return Err(Error::DepthMismatch {
            depth: fused.len(),
            expected: presence.len(),
        });
    }
    if let Some(first) = fused.first() {
        for m in &fused[1..] {
            check_dims(first.dims(), m.dims())?;
        }
    }
    Ok(())
}
