//! Synthetic scene pairs with known change ground truth.
//!
//! Objects (rectangles and random 4- or 8-connected blobs) are planted on a
//! shared canvas so that no two footprints, at either time, touch under
//! 8-adjacency. A `change_fraction` share of them appears, disappears or
//! relocates between T1 and T2. Head outputs are rendered from the object
//! layout:
//!
//! * semantic maps: high inside objects of the category, low elsewhere, with
//!   optional soft rims and uniform jitter;
//! * one instance query per object, a hard footprint map with confidence
//!   `1 - U(0, confidence_jitter)`;
//! * presence 1 for categories present at that time, 0 otherwise, each
//!   flipped with probability `presence_flip`.
//!
//! `illumination` adds a smooth logit-space ramp to every T2 semantic map,
//! mimicking a global lighting shift between acquisitions, and
//! `registration_shift` displaces the whole T2 layout by a few pixels. The
//! ground truth follows the displaced T2 footprints, so a shifted but
//! otherwise unchanged object is not a change.
//!
//! The random stream is xoshiro256** seeded through SplitMix64, and all draws
//! go through the small helpers below, so fixtures are reproducible across
//! platforms and from other languages.

use std::fs;
use std::path::{Path, PathBuf};

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StoreError};
use crate::fusion::{InstanceQuery, InstanceQuerySet, PresenceVector};
use crate::grid::{BinaryMask, ProbMap};
use crate::pipeline::{write_category_masks, CategoryChange};
use crate::store::{write_scene_pair, Observation, ScenePair};

const FOREGROUND: f64 = 0.9;
const BACKGROUND: f64 = 0.1;
const PLACEMENT_ATTEMPTS: usize = 200;

const NAMES: [&str; 6] = [
    "building",
    "tree",
    "water",
    "low vegetation",
    "surface",
    "playground",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Half-width of the uniform jitter added to every semantic value.
    pub semantic_jitter: f64,
    /// Upper bound of the confidence deficit of each instance query.
    pub confidence_jitter: f64,
    /// Probability of flipping each presence score between 0 and 1.
    pub presence_flip: f64,
    /// Rim strength: semantic value of pixels bordering an object, as a
    /// fraction of the way from background to foreground.
    #[serde(default)]
    pub edge_softness: f64,
    /// Peak logit offset of the T2 illumination ramp.
    #[serde(default)]
    pub illumination: f64,
    /// Co-registration error: every T2 footprint is displaced by this many
    /// pixels along one random axis (clipped at the border).
    #[serde(default)]
    pub registration_shift: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub categories: usize,
    /// Inclusive range of planted objects per scene.
    pub objects_per_image: (usize, usize),
    pub change_fraction: f64,
    pub noise: NoiseConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            height: 64,
            width: 64,
            categories: 2,
            objects_per_image: (4, 8),
            change_fraction: 0.3,
            noise: NoiseConfig::default(),
        }
    }
}

impl SynthConfig {
    /// Single-category scenes with the usual pseudo-change sources: soft
    /// object rims under jitter, a T2 illumination ramp and a one-pixel
    /// co-registration error.
    pub fn pseudo_change(seed: u64) -> Self {
        Self {
            seed,
            height: 96,
            width: 96,
            categories: 1,
            objects_per_image: (6, 10),
            change_fraction: 0.3,
            noise: NoiseConfig {
                semantic_jitter: 0.1,
                confidence_jitter: 0.1,
                presence_flip: 0.0,
                edge_softness: 0.25,
                illumination: 1.0,
                registration_shift: 1,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.height < 8 || self.width < 8 {
            return bad(format!(
                "synthetic grid {}x{} must be at least 8x8",
                self.height, self.width
            ));
        }
        if self.categories == 0 {
            return bad("at least one category required".into());
        }
        let (lo, hi) = self.objects_per_image;
        if lo > hi {
            return bad(format!("empty object range {lo}..={hi}"));
        }
        let n = &self.noise;
        for (name, v) in [
            ("change_fraction", self.change_fraction),
            ("semantic_jitter", n.semantic_jitter),
            ("confidence_jitter", n.confidence_jitter),
            ("presence_flip", n.presence_flip),
            ("edge_softness", n.edge_softness),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if !(n.illumination >= 0.0 && n.illumination.is_finite()) {
            return bad(format!("illumination = {} must be >= 0", n.illumination));
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Vec<String> {
        (0..self.categories)
            .map(|c| match NAMES.get(c) {
                Some(name) => name.to_string(),
                None => format!("category{c}"),
            })
            .collect()
    }

    pub fn pair_id(&self) -> String {
        format!("synth-{:016x}", self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fate {
    Unchanged,
    Appears,
    Disappears,
    Relocates,
}

#[derive(Debug, Clone)]
struct PlantedObject {
    category: usize,
    fate: Fate,
    at_t1: Option<Vec<(usize, usize)>>,
    at_t2: Option<Vec<(usize, usize)>>,
}

struct Draws(Xoshiro256StarStar);

impl Draws {
    fn new(seed: u64) -> Self {
        Self(Xoshiro256StarStar::seed_from_u64(seed))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (multiply-shift; `n > 0`).
    fn below(&mut self, n: usize) -> usize {
        ((self.0.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform integer in `lo..=hi`.
    fn between(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    /// Uniform in `[-a, a)`.
    fn symmetric(&mut self, a: f64) -> f64 {
        (2.0 * self.unit() - 1.0) * a
    }

    fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

/// Generates a scene pair and its per-category change ground truth. The
/// ground truth is also attached to the returned pair.
pub fn generate_scene_pair(cfg: &SynthConfig) -> Result<(ScenePair, Vec<BinaryMask>)> {
    cfg.validate()?;
    let (h, w) = (cfg.height, cfg.width);
    let mut rng = Draws::new(cfg.seed);

    let n = rng.between(cfg.objects_per_image.0, cfg.objects_per_image.1);
    let n_changed = if cfg.change_fraction == 0.0 || n == 0 {
        0
    } else {
        ((cfg.change_fraction * n as f64).round() as usize).clamp(1, n)
    };

    let mut forbidden = vec![false; h * w];
    let mut objects = Vec::with_capacity(n);
    for i in 0..n {
        let category = rng.below(cfg.categories);
        let fate = if i < n_changed {
            match rng.below(3) {
                0 => Fate::Appears,
                1 => Fate::Disappears,
                _ => Fate::Relocates,
            }
        } else {
            Fate::Unchanged
        };
        let shape = random_shape(&mut rng, h, w);
        let first = place(&mut rng, &shape, h, w, &mut forbidden)?;
        let (at_t1, at_t2) = match fate {
            Fate::Unchanged => (Some(first.clone()), Some(first)),
            Fate::Appears => (None, Some(first)),
            Fate::Disappears => (Some(first), None),
            Fate::Relocates => {
                let second = place(&mut rng, &shape, h, w, &mut forbidden)?;
                (Some(first), Some(second))
            }
        };
        objects.push(PlantedObject {
            category,
            fate,
            at_t1,
            at_t2,
        });
    }

    let shift = cfg.noise.registration_shift as i64;
    if shift > 0 {
        let sign = if rng.chance(0.5) { 1 } else { -1 };
        let (dr, dc) = if rng.chance(0.5) {
            (sign * shift, 0)
        } else {
            (0, sign * shift)
        };
        for o in &mut objects {
            if let Some(fp) = o.at_t2.take() {
                let moved = displace(&fp, dr, dc, h, w);
                o.at_t2 = if moved.is_empty() { None } else { Some(moved) };
            }
        }
    }

    let t1 = render(&mut rng, cfg, &objects, |o| o.at_t1.as_deref(), 0.0)?;
    let t2 = render(
        &mut rng,
        cfg,
        &objects,
        |o| o.at_t2.as_deref(),
        cfg.noise.illumination,
    )?;

    let mut truth = vec![BinaryMask::zeros(h, w); cfg.categories];
    for o in objects.iter().filter(|o| o.fate != Fate::Unchanged) {
        for fp in [&o.at_t1, &o.at_t2].into_iter().flatten() {
            for &(r, c) in fp {
                truth[o.category].set(r, c, true);
            }
        }
    }

    let pair = ScenePair {
        pair_id: cfg.pair_id(),
        height: h,
        width: w,
        vocabulary: cfg.vocabulary(),
        t1,
        t2,
        ground_truth: Some(truth.clone()),
        source_images: None,
    };
    Ok((pair, truth))
}

/// Where [`write_corpus`] put things.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLayout {
    /// One sub-directory per pair, each holding `manifest.json`.
    pub scenes: PathBuf,
    /// Per-category ground-truth masks, `<pair_id>.<category>.sfid`.
    pub ground_truth: PathBuf,
    pub manifests: Vec<PathBuf>,
}

/// Generates `count` pairs with seeds `base.seed, base.seed + 1, ...` and
/// persists them under `out` in the tensor-store formats.
pub fn write_corpus(base: &SynthConfig, count: usize, out: impl AsRef<Path>) -> Result<CorpusLayout> {
    let out = out.as_ref();
    let scenes = out.join("scenes");
    let ground_truth = out.join("gt");
    for dir in [&scenes, &ground_truth] {
        fs::create_dir_all(dir).map_err(|source| StoreError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    let mut manifests = Vec::with_capacity(count);
    for i in 0..count {
        let cfg = SynthConfig {
            seed: base.seed.wrapping_add(i as u64),
            ..base.clone()
        };
        let (pair, truth) = generate_scene_pair(&cfg)?;
        manifests.push(write_scene_pair(scenes.join(&pair.pair_id), &pair)?);
        let changes: Vec<CategoryChange> = pair
            .vocabulary
            .iter()
            .zip(truth)
            .map(|(name, mask)| CategoryChange {
                category: name.clone(),
                mask,
            })
            .collect();
        write_category_masks(&ground_truth, &pair.pair_id, &changes)?;
    }
    Ok(CorpusLayout {
        scenes,
        ground_truth,
        manifests,
    })
}

/// Pixel offsets of a random rectangle or blob, anchored at `(0, 0)`.
fn random_shape(rng: &mut Draws, h: usize, w: usize) -> Vec<(usize, usize)> {
    let max_side = (h.min(w) / 5).max(3);
    if rng.chance(0.5) {
        let (rh, rw) = (rng.between(3, max_side), rng.between(3, max_side));
        (0..rh).flat_map(|r| (0..rw).map(move |c| (r, c))).collect()
    } else {
        let radius = (max_side / 2).max(2) as i64;
        let side = (2 * radius + 1) as usize;
        let target = rng.between(5, (side * side / 3).max(5));
        let eight = rng.chance(0.5);
        let steps: &[(i64, i64)] = if eight {
            &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
        } else {
            &[(-1, 0), (0, -1), (0, 1), (1, 0)]
        };
        let mut cells: Vec<(i64, i64)> = vec![(0, 0)];
        while cells.len() < target {
            let (r, c) = cells[rng.below(cells.len())];
            let (dr, dc) = steps[rng.below(steps.len())];
            let next = (r + dr, c + dc);
            if next.0.abs() <= radius && next.1.abs() <= radius && !cells.contains(&next) {
                cells.push(next);
            }
        }
        let r0 = cells.iter().map(|p| p.0).min().unwrap();
        let c0 = cells.iter().map(|p| p.1).min().unwrap();
        let mut px: Vec<(usize, usize)> = cells
            .into_iter()
            .map(|(r, c)| ((r - r0) as usize, (c - c0) as usize))
            .collect();
        px.sort_unstable();
        px
    }
}

fn displace(fp: &[(usize, usize)], dr: i64, dc: i64, h: usize, w: usize) -> Vec<(usize, usize)> {
    fp.iter()
        .map(|&(r, c)| (r as i64 + dr, c as i64 + dc))
        .filter(|&(r, c)| r >= 0 && c >= 0 && r < h as i64 && c < w as i64)
        .map(|(r, c)| (r as usize, c as usize))
        .collect()
}

/// Finds a spot for `shape` that keeps a one-pixel gap to everything placed
/// so far, then reserves the spot plus its 8-neighbourhood.
fn place(
    rng: &mut Draws,
    shape: &[(usize, usize)],
    h: usize,
    w: usize,
    forbidden: &mut [bool],
) -> Result<Vec<(usize, usize)>> {
    let sh = shape.iter().map(|p| p.0).max().unwrap() + 1;
    let sw = shape.iter().map(|p| p.1).max().unwrap() + 1;
    if sh > h || sw > w {
        return Err(Error::Generation(format!(
            "object {sh}x{sw} does not fit a {h}x{w} grid"
        )));
    }
    for _ in 0..PLACEMENT_ATTEMPTS {
        let (r0, c0) = (rng.below(h - sh + 1), rng.below(w - sw + 1));
        if shape.iter().all(|&(r, c)| !forbidden[(r0 + r) * w + c0 + c]) {
            let placed: Vec<(usize, usize)> =
                shape.iter().map(|&(r, c)| (r0 + r, c0 + c)).collect();
            for &(r, c) in &placed {
                for nr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                    for nc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                        forbidden[nr * w + nc] = true;
                    }
                }
            }
            return Ok(placed);
        }
    }
    Err(Error::Generation(format!(
        "no free spot for a {sh}x{sw} object after {PLACEMENT_ATTEMPTS} attempts"
    )))
}

fn render<'a, F>(
    rng: &mut Draws,
    cfg: &SynthConfig,
    objects: &'a [PlantedObject],
    footprint: F,
    illumination: f64,
) -> Result<Observation>
where
    F: Fn(&'a PlantedObject) -> Option<&'a [(usize, usize)]>,
{
    let (h, w, k) = (cfg.height, cfg.width, cfg.categories);
    let noise = &cfg.noise;

    // base semantic value per category and pixel
    let mut base = vec![vec![BACKGROUND; h * w]; k];
    let mut occupied = vec![false; h * w];
    for o in objects {
        if let Some(fp) = footprint(o) {
            for &(r, c) in fp {
                base[o.category][r * w + c] = FOREGROUND;
                occupied[r * w + c] = true;
            }
        }
    }
    if noise.edge_softness > 0.0 {
        let rim = BACKGROUND + noise.edge_softness * (FOREGROUND - BACKGROUND);
        for o in objects {
            let Some(fp) = footprint(o) else { continue };
            for &(r, c) in fp {
                for nr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                    for nc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                        let i = nr * w + nc;
                        if !occupied[i] && base[o.category][i] < rim {
                            base[o.category][i] = rim;
                        }
                    }
                }
            }
        }
    }

    let ramp = if illumination > 0.0 {
        let angle = rng.unit() * std::f64::consts::TAU;
        Some(illumination_ramp(h, w, angle))
    } else {
        None
    };

    let mut semantic = Vec::with_capacity(k);
    for plane in &base {
        let values = plane
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let lit = match &ramp {
                    Some(g) => sigmoid(logit(p) + illumination * g[i]),
                    None => p,
                };
                let v = if noise.semantic_jitter > 0.0 {
                    lit + rng.symmetric(noise.semantic_jitter)
                } else {
                    lit
                };
                v.clamp(0.0, 1.0) as f32
            })
            .collect();
        semantic.push(ProbMap::from_vec(h, w, values)?);
    }

    let mut queries = Vec::new();
    let mut present = vec![false; k];
    for o in objects {
        let Some(fp) = footprint(o) else { continue };
        present[o.category] = true;
        let mut map = vec![0.0f32; h * w];
        for &(r, c) in fp {
            map[r * w + c] = 1.0;
        }
        let confidence = 1.0 - rng.unit() * noise.confidence_jitter;
        queries.push(InstanceQuery::new(
            ProbMap::from_vec(h, w, map)?,
            confidence as f32,
            Some(o.category),
        )?);
    }

    let presence = present
        .iter()
        .map(|&p| {
            let flip = noise.presence_flip > 0.0 && rng.chance(noise.presence_flip);
            if p != flip {
                1.0
            } else {
                0.0
            }
        })
        .collect();

    Ok(Observation {
        semantic,
        queries: InstanceQuerySet::new(h, w, queries)?,
        presence: PresenceVector::new(presence)?,
    })
}

/// Linear ramp in `[0, 1]` across the grid along direction `angle`.
fn illumination_ramp(h: usize, w: usize, angle: f64) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    let raw: Vec<f64> = (0..h * w)
        .map(|i| {
            let (r, col) = ((i / w) as f64, (i % w) as f64);
            r * s + col * c
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    raw.into_iter().map(|v| (v - lo) / span).collect()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let cfg = SynthConfig::pseudo_change(7);
        assert_eq!(generate_scene_pair(&cfg).unwrap(), generate_scene_pair(&cfg).unwrap());
        let other = SynthConfig::pseudo_change(8);
        assert_ne!(
            generate_scene_pair(&cfg).unwrap().0,
            generate_scene_pair(&other).unwrap().0
        );
    }

    #[test]
    fn no_change_means_empty_truth() {
        let cfg = SynthConfig {
            change_fraction: 0.0,
            ..noiseless(3)
        };
        let (pair, truth) = generate_scene_pair(&cfg).unwrap();
        assert!(truth.iter().all(BinaryMask::is_empty));
        assert_eq!(pair.t1.semantic, pair.t2.semantic);
    }

    #[test]
    fn single_appearing_object_is_the_truth() {
        let cfg = SynthConfig {
            objects_per_image: (1, 1),
            change_fraction: 1.0,
            ..noiseless(0)
        };
        // find a seed whose single object appears
        let (pair, truth) = (0..64)
            .map(|seed| generate_scene_pair(&SynthConfig { seed, ..cfg.clone() }).unwrap())
            .find(|(p, _)| p.t1.queries.is_empty())
            .expect("some seed plants an appearing object");
        let q = pair.t2.queries.iter().next().unwrap();
        let c = q.category.unwrap();
        let footprint: Vec<bool> = q.map.values().iter().map(|&v| v == 1.0).collect();
        assert_eq!(truth[c].bits(), footprint.as_slice());
    }

    #[test]
    fn footprints_never_touch() {
        for seed in 0..20 {
            let (pair, _) = generate_scene_pair(&noiseless(seed)).unwrap();
            for obs in [&pair.t1, &pair.t2] {
                let maps: Vec<&ProbMap> = obs.queries.iter().map(|q| &q.map).collect();
                for (i, a) in maps.iter().enumerate() {
                    for b in &maps[i + 1..] {
                        for r in 0..a.height() {
                            for c in 0..a.width() {
                                if a.get(r, c) == 0.0 {
                                    continue;
                                }
                                for nr in r.saturating_sub(1)..=(r + 1).min(a.height() - 1) {
                                    for nc in c.saturating_sub(1)..=(c + 1).min(a.width() - 1) {
                                        assert_eq!(b.get(nr, nc), 0.0);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn overcrowded_config_fails() {
        let cfg = SynthConfig {
            height: 8,
            width: 8,
            objects_per_image: (40, 40),
            ..noiseless(1)
        };
        assert!(matches!(generate_scene_pair(&cfg), Err(Error::Generation(_))));
    }

    #[test]
    fn rejects_invalid_configs() {
        let small = SynthConfig {
            height: 4,
            ..noiseless(0)
        };
        assert!(small.validate().is_err());
        let mut noisy = noiseless(0);
        noisy.noise.semantic_jitter = 2.0;
        assert!(noisy.validate().is_err());
    }

    #[test]
    fn draws_are_in_range() {
        let mut rng = Draws::new(42);
        for _ in 0..1000 {
            let u = rng.unit();
            assert!((0.0..1.0).contains(&u));
            assert!(rng.below(7) < 7);
            let b = rng.between(3, 5);
            assert!((3..=5).contains(&b));
        }
    }

    #[test]
    fn ramp_spans_unit_interval() {
        let g = illumination_ramp(9, 13, 0.7);
        let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }
}
