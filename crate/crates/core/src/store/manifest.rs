use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_tensor, stack_masks, stack_prob_maps, write_tensor, Tensor};
use crate::error::StoreError;
use crate::fusion::{InstanceQuery, InstanceQuerySet, PresenceVector};
use crate::grid::{BinaryMask, ProbMap};

/// On-disk description of one bi-temporal scene pair. Paths are relative to
/// the manifest's directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePairManifest {
    pub pair_id: String,
    pub height: usize,
    pub width: usize,
    pub vocabulary: Vec<String>,
    pub t1: TimeEntry,
    pub t2: TimeEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_images: Option<SourceImages>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeEntry {
    /// `C x H x W` float32 tensor, one map per vocabulary entry.
    pub semantic_stack: PathBuf,
    #[serde(default)]
    pub instance_queries: Vec<QueryEntry>,
    pub presence: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEntry {
    /// `H x W` float32 tensor.
    pub map: PathBuf,
    pub confidence: f64,
    /// Vocabulary entry the query was prompted with. Omitted means the query
    /// applies to every category.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

/// Paths of the source imagery. Carried as metadata only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceImages {
    pub t1: String,
    pub t2: String,
}

/// Head outputs for one image of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub semantic: Vec<ProbMap>,
    pub queries: InstanceQuerySet,
    pub presence: PresenceVector,
}

/// A fully loaded and validated scene pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePair {
    pub pair_id: String,
    pub height: usize,
    pub width: usize,
    pub vocabulary: Vec<String>,
    pub t1: Observation,
    pub t2: Observation,
    pub ground_truth: Option<Vec<BinaryMask>>,
    pub source_images: Option<SourceImages>,
}

impl ScenePair {
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn categories(&self) -> usize {
        self.vocabulary.len()
    }
}

pub fn load_scene_pair(manifest_path: impl AsRef<Path>) -> Result<ScenePair, StoreError> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            StoreError::MissingFile(manifest_path.to_path_buf())
        } else {
            StoreError::Io {
                path: manifest_path.to_path_buf(),
                source,
            }
        }
    })?;
    let manifest: ScenePairManifest =
        serde_json::from_str(&text).map_err(|source| StoreError::ManifestSyntax {
            path: manifest_path.to_path_buf(),
            source,
        })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    resolve(&manifest, base)
}

fn resolve(m: &ScenePairManifest, base: &Path) -> Result<ScenePair, StoreError> {
    validate_header(m)?;
    let c = m.vocabulary.len();
    let (h, w) = (m.height, m.width);

    for (time, entry) in [("t1", &m.t1), ("t2", &m.t2)] {
        if entry.presence.len() != c {
            return Err(StoreError::PresenceLength {
                time,
                expected: c,
                actual: entry.presence.len(),
            });
        }
        check_unit(&format!("{time} presence"), &entry.presence)?;
        let confidences: Vec<f64> = entry.instance_queries.iter().map(|q| q.confidence).collect();
        check_unit(&format!("{time} confidence"), &confidences)?;
    }

    let sem1 = read_tensor(base.join(&m.t1.semantic_stack))?;
    let sem2 = read_tensor(base.join(&m.t2.semantic_stack))?;
    let grid = |t: &Tensor| match t.shape() {
        [.., h, w] => (*h, *w),
        _ => (0, 0),
    };
    if grid(&sem1) != grid(&sem2) {
        return Err(StoreError::CrossTimeShape {
            t1: grid(&sem1),
            t2: grid(&sem2),
        });
    }

    let t1 = load_observation(m, base, "t1", &m.t1, sem1)?;
    let t2 = load_observation(m, base, "t2", &m.t2, sem2)?;

    let ground_truth = match &m.ground_truth {
        Some(path) => {
            let t = read_tensor(base.join(path))?;
            expect_shape("ground_truth", &t, &[c, h, w])?;
            Some(t.to_masks("ground_truth")?)
        }
        None => None,
    };

    Ok(ScenePair {
        pair_id: m.pair_id.clone(),
        height: h,
        width: w,
        vocabulary: m.vocabulary.clone(),
        t1,
        t2,
        ground_truth,
        source_images: m.source_images.clone(),
    })
}

fn validate_header(m: &ScenePairManifest) -> Result<(), StoreError> {
    let invalid = |msg: String| Err(StoreError::InvalidManifest(msg));
    if m.pair_id.is_empty() || m.pair_id.contains(['.', '/', '\\']) {
        return invalid(format!(
            "pair_id {:?} must be non-empty and free of '.', '/' and '\\'",
            m.pair_id
        ));
    }
    if m.height == 0 || m.width == 0 {
        return invalid(format!("grid {}x{} must be non-empty", m.height, m.width));
    }
    if m.vocabulary.is_empty() {
        return invalid("vocabulary is empty".into());
    }
    let mut seen = HashSet::new();
    for name in &m.vocabulary {
        if name.is_empty() || name.contains(['/', '\\']) {
            return invalid(format!("category name {name:?} is not usable in a file name"));
        }
        if !seen.insert(name) {
            return invalid(format!("category {name:?} listed twice"));
        }
    }
    Ok(())
}

fn load_observation(
    m: &ScenePairManifest,
    base: &Path,
    time: &'static str,
    entry: &TimeEntry,
    semantic: Tensor,
) -> Result<Observation, StoreError> {
    let (c, h, w) = (m.vocabulary.len(), m.height, m.width);
    let what = format!("{time} semantic_stack");
    expect_shape(&what, &semantic, &[c, h, w])?;
    let semantic = semantic.to_prob_maps(&what)?;

    let mut queries = Vec::with_capacity(entry.instance_queries.len());
    for (k, q) in entry.instance_queries.iter().enumerate() {
        let what = format!("{time} instance query {k}");
        let category = match &q.category {
            Some(name) => Some(m.vocabulary.iter().position(|v| v == name).ok_or_else(|| {
                StoreError::InvalidManifest(format!("{what}: unknown category {name:?}"))
            })?),
            None => None,
        };
        let t = read_tensor(base.join(&q.map))?;
        expect_shape(&what, &t, &[h, w])?;
        let map = t.to_prob_maps(&what)?.remove(0);
        queries.push(
            InstanceQuery::new(map, q.confidence as f32, category)
                .expect("confidence range checked above"),
        );
    }
    let queries = InstanceQuerySet::new(h, w, queries).expect("query shapes checked above");
    let presence = PresenceVector::new(entry.presence.iter().map(|&p| p as f32).collect())
        .expect("presence range checked above");
    Ok(Observation {
        semantic,
        queries,
        presence,
    })
}

fn expect_shape(what: &str, t: &Tensor, expected: &[usize]) -> Result<(), StoreError> {
    if t.shape() != expected {
        return Err(StoreError::ShapeMismatch {
            what: what.to_string(),
            expected: expected.to_vec(),
            actual: t.shape().to_vec(),
        });
    }
    Ok(())
}

fn check_unit(what: &str, values: &[f64]) -> Result<(), StoreError> {
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(StoreError::OutOfRange {
            what: what.to_string(),
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Persists `pair` under `dir` and returns the manifest path
/// (`dir/manifest.json`). Tensor files are named after their role.
pub fn write_scene_pair(dir: impl AsRef<Path>, pair: &ScenePair) -> Result<PathBuf, StoreError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let mut times = Vec::with_capacity(2);
    for (time, obs) in [("t1", &pair.t1), ("t2", &pair.t2)] {
        let sem_name = format!("{time}.semantic.sfid");
        write_tensor(dir.join(&sem_name), &stack_prob_maps(&obs.semantic)?)?;
        let mut queries = Vec::with_capacity(obs.queries.len());
        for (k, q) in obs.queries.iter().enumerate() {
            let name = format!("{time}.query{k:03}.sfid");
            write_tensor(dir.join(&name), &Tensor::from(&q.map))?;
            queries.push(QueryEntry {
                map: name.into(),
                confidence: q.confidence as f64,
                category: q.category.map(|c| pair.vocabulary[c].clone()),
            });
        }
        times.push(TimeEntry {
            semantic_stack: sem_name.into(),
            instance_queries: queries,
            presence: obs.presence.scores().iter().map(|&p| p as f64).collect(),
        });
    }

    let ground_truth = match &pair.ground_truth {
        Some(masks) => {
            write_tensor(dir.join("ground_truth.sfid"), &stack_masks(masks)?)?;
            Some(PathBuf::from("ground_truth.sfid"))
        }
        None => None,
    };

    let t2 = times.pop().unwrap();
    let t1 = times.pop().unwrap();
    let manifest = ScenePairManifest {
        pair_id: pair.pair_id.clone(),
        height: pair.height,
        width: pair.width,
        vocabulary: pair.vocabulary.clone(),
        t1,
        t2,
        ground_truth,
        source_images: pair.source_images.clone(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|source| StoreError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
