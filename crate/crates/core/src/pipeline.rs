//! Batch runner: scene-pair manifests in, per-category change masks and a run
//! manifest out; plus dataset-level evaluation of a prediction directory
//! against a ground-truth directory.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StoreError};
use crate::fusion::{binarize_category, fuse_stack, gate, gate_and_label};
use crate::grid::BinaryMask;
use crate::matching::{
    detect_changes_instance, detect_changes_logit, detect_changes_pmc, MatchConfig, Norm,
    DEFAULT_LOGIT_THRESHOLD, DEFAULT_TAU_MATCH,
};
use crate::metrics::{confusion_counts, ConfusionCounts, EvalReport};
use crate::store::{load_scene_pair, read_tensor, write_tensor, ScenePair, ScenePairManifest, Tensor};

pub const DEFAULT_BACKGROUND_THRESHOLD: f64 = 0.5;
pub const WORKERS_ENV: &str = "SFID_WORKERS";
pub const RUN_MANIFEST: &str = "run.json";
pub const MASK_EXTENSION: &str = "sfid";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Instance decoupling and bi-temporal matching.
    #[default]
    Instance,
    /// Pixel-wise label comparison.
    Pmc,
    /// Thresholded L1 distance between gated probability maps.
    L1,
    /// Thresholded L2 distance between gated probability maps.
    L2,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "instance" => Ok(Strategy::Instance),
            "pmc" => Ok(Strategy::Pmc),
            "l1" => Ok(Strategy::L1),
            "l2" => Ok(Strategy::L2),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy {other:?} (expected instance, pmc, l1 or l2)"
            ))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Instance => "instance",
            Strategy::Pmc => "pmc",
            Strategy::L1 => "l1",
            Strategy::L2 => "l2",
        })
    }
}

/// Every knob of a run. Deserializes from a JSON config file with any subset
/// of fields; missing ones take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Manifest files, or directories searched recursively for
    /// `manifest.json` / `*.manifest.json`.
    pub inputs: Vec<PathBuf>,
    /// Restricts output to these categories (labeling still competes over
    /// the full vocabulary).
    pub vocabulary: Option<Vec<String>>,
    pub tau_match: f64,
    pub background_threshold: f64,
    pub min_area: usize,
    pub strategy: Strategy,
    /// Threshold on the max-normalized distance for the `l1` / `l2`
    /// strategies.
    pub baseline_threshold: f64,
    /// Worker threads; 0 resolves from `SFID_WORKERS`, then the CPU count.
    pub workers: usize,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            vocabulary: None,
            tau_match: DEFAULT_TAU_MATCH,
            background_threshold: DEFAULT_BACKGROUND_THRESHOLD,
            min_area: 0,
            strategy: Strategy::Instance,
            baseline_threshold: DEFAULT_LOGIT_THRESHOLD,
            workers: 0,
            output: PathBuf::from("sfid-out"),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn match_config(&self) -> Result<MatchConfig> {
        MatchConfig::new(self.tau_match, self.min_area)
    }

    pub fn validate(&self) -> Result<()> {
        self.match_config()?;
        if !(0.0..=1.0).contains(&self.background_threshold) {
            return Err(Error::InvalidConfig(format!(
                "background_threshold {} outside [0, 1]",
                self.background_threshold
            )));
        }
        if !(self.baseline_threshold >= 0.0 && self.baseline_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "baseline_threshold {} must be a non-negative number",
                self.baseline_threshold
            )));
        }
        if let Some(v) = &self.vocabulary {
            if v.is_empty() {
                return Err(Error::InvalidConfig("vocabulary override is empty".into()));
            }
        }
        Ok(())
    }

    /// Replaces `workers == 0` with `SFID_WORKERS` or the available
    /// parallelism.
    pub fn resolve_workers(&mut self) -> Result<()> {
        if self.workers > 0 {
            return Ok(());
        }
        self.workers = match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => n,
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "{WORKERS_ENV}={v:?} is not a positive integer"
                    )))
                }
            },
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Ok(())
    }
}

/// Change mask for one vocabulary entry of a pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryChange {
    pub category: String,
    pub mask: BinaryMask,
}

/// Runs fusion, labeling and the configured change strategy on one pair.
pub fn detect_pair(pair: &ScenePair, cfg: &RunConfig) -> Result<Vec<CategoryChange>> {
    let selected: Vec<usize> = match &cfg.vocabulary {
        None => (0..pair.categories()).collect(),
        Some(names) => names
            .iter()
            .map(|n| {
                pair.vocabulary.iter().position(|v| v == n).ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "category {n:?} not in vocabulary of pair {}",
                        pair.pair_id
                    ))
                })
            })
            .collect::<Result<_>>()?,
    };

    let fused1 = fuse_stack(&pair.t1.semantic, &pair.t1.queries)?;
    let fused2 = fuse_stack(&pair.t2.semantic, &pair.t2.queries)?;

    let masks: Vec<BinaryMask> = match cfg.strategy {
        Strategy::Instance | Strategy::Pmc => {
            let l1 = gate_and_label(&fused1, &pair.t1.presence, cfg.background_threshold)?;
            let l2 = gate_and_label(&fused2, &pair.t2.presence, cfg.background_threshold)?;
            if cfg.strategy == Strategy::Pmc {
                selected
                    .iter()
                    .map(|&c| detect_changes_pmc(&l1, &l2, c))
                    .collect::<Result<_>>()?
            } else {
                let mcfg = cfg.match_config()?;
                selected
                    .iter()
                    .map(|&c| {
                        let m1 = binarize_category(&l1, c)?;
                        let m2 = binarize_category(&l2, c)?;
                        detect_changes_instance(&m1, &m2, &mcfg)
                    })
                    .collect::<Result<_>>()?
            }
        }
        Strategy::L1 | Strategy::L2 => {
            let norm = if cfg.strategy == Strategy::L1 {
                Norm::L1
            } else {
                Norm::L2
            };
            let g1 = gate(&fused1, &pair.t1.presence)?;
            let g2 = gate(&fused2, &pair.t2.presence)?;
            selected
                .iter()
                .map(|&c| {
                    detect_changes_logit(
                        &g1[c..=c],
                        &g2[c..=c],
                        norm,
                        cfg.baseline_threshold,
                    )
                })
                .collect::<Result<_>>()?
        }
    };

    Ok(selected
        .iter()
        .zip(masks)
        .map(|(&c, mask)| CategoryChange {
            category: pair.vocabulary[c].clone(),
            mask,
        })
        .collect())
}

/// `<pair_id>.<category>.sfid`
pub fn mask_file_name(pair_id: &str, category: &str) -> String {
    format!("{pair_id}.{category}.{MASK_EXTENSION}")
}

/// Writes one uint8 `H x W` SFID file per category into `dir`.
pub fn write_category_masks(
    dir: impl AsRef<Path>,
    pair_id: &str,
    changes: &[CategoryChange],
) -> Result<()> {
    let dir = dir.as_ref();
    for ch in changes {
        write_tensor(dir.join(mask_file_name(pair_id, &ch.category)), &Tensor::from(&ch.mask))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_id: Option<String>,
    pub manifest: PathBuf,
    pub status: PairStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outputs: Vec<String>,
    pub elapsed_ms: f64,
}

/// Contents of `run.json`: the effective configuration and one record per
/// manifest, ordered by pair id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub succeeded: usize,
    pub failed: usize,
    pub pairs: Vec<PairRecord>,
}

impl RunManifest {
    pub fn has_failures(&self) -> bool {
        self.failed > 0
    }
}

/// Collects manifest files from the configured inputs, sorted.
pub fn discover_manifests(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for input in inputs {
        if input.is_file() {
            found.push(input.clone());
        } else if input.is_dir() {
            walk(input, &mut found)?;
        } else {
            return Err(Error::InvalidConfig(format!(
                "input {} does not exist",
                input.display()
            )));
        }
    }
    found.sort();
    found.dedup();
    Ok(found)
}

fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let path = entry
            .map_err(|source| StoreError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.is_dir() {
            walk(&path, found)?;
        } else if path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n == "manifest.json" || n.ends_with(".manifest.json"))
        {
            found.push(path);
        }
    }
    Ok(())
}

/// Processes every discovered pair on a pool of `cfg.workers` threads.
///
/// A failing pair is recorded and skipped; the returned manifest reports how
/// many failed. Only configuration problems abort the run.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    cfg.resolve_workers()?;
    let manifests = discover_manifests(&cfg.inputs)?;
    fs::create_dir_all(&cfg.output).map_err(|source| StoreError::Io {
        path: cfg.output.clone(),
        source,
    })?;

    // Duplicate pair ids would race on the same output files: only the first
    // manifest (in path order) keeps its id.
    let mut seen = HashSet::new();
    let duplicate: Vec<Option<String>> = manifests
        .iter()
        .map(|path| {
            let id = fs::read_to_string(path)
                .ok()
                .and_then(|t| serde_json::from_str::<ScenePairManifest>(&t).ok())
                .map(|m| m.pair_id)?;
            (!seen.insert(id.clone())).then_some(id)
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;

    let mut pairs: Vec<PairRecord> = pool.install(|| {
        manifests
            .par_iter()
            .zip(duplicate.par_iter())
            .map(|(path, dup)| process_one(path, dup.as_deref(), &cfg))
            .collect()
    });
    pairs.sort_by(|a, b| (&a.pair_id, &a.manifest).cmp(&(&b.pair_id, &b.manifest)));

    let failed = pairs.iter().filter(|p| p.status == PairStatus::Failed).count();
    let run = RunManifest {
        succeeded: pairs.len() - failed,
        failed,
        config: cfg,
        pairs,
    };
    let path = run.config.output.join(RUN_MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&run).expect("run manifest serializes"))
        .map_err(|source| StoreError::Io { path, source })?;
    Ok(run)
}

fn process_one(path: &Path, duplicate_of: Option<&str>, cfg: &RunConfig) -> PairRecord {
    let start = Instant::now();
    let mut record = PairRecord {
        pair_id: None,
        manifest: path.to_path_buf(),
        status: PairStatus::Failed,
        error: None,
        outputs: Vec::new(),
        elapsed_ms: 0.0,
    };
    let result = (|| -> Result<Vec<String>> {
        if let Some(id) = duplicate_of {
            return Err(Error::InvalidConfig(format!("duplicate pair id {id:?}")));
        }
        let pair = load_scene_pair(path)?;
        record.pair_id = Some(pair.pair_id.clone());
        let changes = detect_pair(&pair, cfg)?;
        write_category_masks(&cfg.output, &pair.pair_id, &changes)?;
        Ok(changes
            .iter()
            .map(|c| mask_file_name(&pair.pair_id, &c.category))
            .collect())
    })();
    match result {
        Ok(outputs) => {
            record.status = PairStatus::Ok;
            record.outputs = outputs;
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    record
}

/// Scores every `<pair_id>.<category>.sfid` file in `gt_dir` against its
/// namesake in `pred_dir`. Counts are summed per category over all pairs;
/// categories are reported in name order.
pub fn run_eval(pred_dir: impl AsRef<Path>, gt_dir: impl AsRef<Path>) -> Result<EvalReport> {
    let (pred_dir, gt_dir) = (pred_dir.as_ref(), gt_dir.as_ref());
    let mut names: Vec<String> = fs::read_dir(gt_dir)
        .map_err(|source| StoreError::Io {
            path: gt_dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.ends_with(&format!(".{MASK_EXTENSION}")))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Eval(format!(
            "no ground-truth masks in {}",
            gt_dir.display()
        )));
    }

    let mut per_category: BTreeMap<String, ConfusionCounts> = BTreeMap::new();
    for name in &names {
        let stem = &name[..name.len() - MASK_EXTENSION.len() - 1];
        let Some((_, category)) = stem.split_once('.') else {
            return Err(Error::Eval(format!(
                "{name}: expected <pair_id>.<category>.{MASK_EXTENSION}"
            )));
        };
        let pred_path = pred_dir.join(name);
        if !pred_path.is_file() {
            return Err(Error::Eval(format!(
                "no prediction for {name} in {}",
                pred_dir.display()
            )));
        }
        let gt = single_mask(&gt_dir.join(name))?;
        let pred = single_mask(&pred_path)?;
        *per_category.entry(category.to_string()).or_default() += confusion_counts(&pred, &gt)?;
    }
    EvalReport::from_counts(per_category)
}

fn single_mask(path: &Path) -> Result<BinaryMask> {
    let t = read_tensor(path)?;
    if t.shape().len() != 2 {
        return Err(StoreError::ShapeMismatch {
            what: path.display().to_string(),
            expected: vec![0, 0],
            actual: t.shape().to_vec(),
        }
        .into());
    }
    Ok(t.to_masks(&path.display().to_string())?.remove(0))
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn write_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let io = |path: PathBuf| move |source| StoreError::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let json = dir.join("report.json");
    fs::write(&json, report.to_json()).map_err(io(json.clone()))?;
    let txt = dir.join("report.txt");
    fs::write(&txt, report.to_table()).map_err(io(txt.clone()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_parses() {
        assert_eq!("pmc".parse::<Strategy>().unwrap(), Strategy::Pmc);
        assert!("l3".parse::<Strategy>().is_err());
        assert_eq!(Strategy::L2.to_string(), "l2");
    }

    #[test]
    fn config_file_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"tau_match": 0.75, "strategy": "l1"}"#).unwrap();
        assert_eq!(cfg.tau_match, 0.75);
        assert_eq!(cfg.strategy, Strategy::L1);
        assert_eq!(cfg.background_threshold, DEFAULT_BACKGROUND_THRESHOLD);
        assert!(serde_json::from_str::<RunConfig>(r#"{"tau": 0.75}"#).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = RunConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            RunConfig { tau_match: 0.0, ..ok.clone() },
            RunConfig { background_threshold: 1.5, ..ok.clone() },
            RunConfig { baseline_threshold: -0.1, ..ok.clone() },
            RunConfig { vocabulary: Some(vec![]), ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn explicit_workers_win() {
        let mut cfg = RunConfig { workers: 3, ..RunConfig::default() };
        cfg.resolve_workers().unwrap();
        assert_eq!(cfg.workers, 3);
    }

    #[test]
    fn mask_names() {
        assert_eq!(mask_file_name("p1", "low vegetation"), "p1.low vegetation.sfid");
    }
}
