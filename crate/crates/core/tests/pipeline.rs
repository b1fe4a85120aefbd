use std::fs;
use std::path::Path;

use sfid::fusion::{fuse_stack, gate_and_label};
use sfid::grid::BinaryMask;
use sfid::matching::detect_changes_pmc;
use sfid::pipeline::{
    detect_pair, mask_file_name, run_eval, run_pipeline, write_report, PairStatus, RunConfig,
    RunManifest, Strategy, RUN_MANIFEST,
};
use sfid::store::{load_scene_pair, read_tensor, write_tensor, Tensor};
use sfid::synth::{write_corpus, NoiseConfig, SynthConfig};

fn noisy(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        noise: NoiseConfig {
            semantic_jitter: 0.1,
            confidence_jitter: 0.1,
            ..NoiseConfig::default()
        },
        ..SynthConfig::default()
    }
}

fn run(inputs: &Path, output: &Path, strategy: Strategy) -> RunManifest {
    run_pipeline(&RunConfig {
        inputs: vec![inputs.to_path_buf()],
        output: output.to_path_buf(),
        strategy,
        workers: 2,
        ..RunConfig::default()
    })
    .unwrap()
}

fn mask_at(path: &Path) -> BinaryMask {
    read_tensor(path).unwrap().to_masks("mask").unwrap().remove(0)
}

#[test]
fn unchanged_scenes_give_empty_masks() {
    let tmp = tempfile::tempdir().unwrap();
    let base = SynthConfig {
        change_fraction: 0.0,
        ..noisy(40)
    };
    let corpus = write_corpus(&base, 4, tmp.path().join("c")).unwrap();
    let out = tmp.path().join("out");
    let manifest = run(&corpus.scenes, &out, Strategy::Instance);
    assert_eq!((manifest.succeeded, manifest.failed), (4, 0));
    for record in &manifest.pairs {
        assert_eq!(record.outputs.len(), 2);
        for name in &record.outputs {
            assert!(mask_at(&out.join(name)).is_empty(), "{name}");
        }
    }
}

#[test]
fn pmc_strategy_dispatches_to_label_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = write_corpus(&noisy(50), 3, tmp.path().join("c")).unwrap();
    let out = tmp.path().join("out");
    run(&corpus.scenes, &out, Strategy::Pmc);
    for path in &corpus.manifests {
        let pair = load_scene_pair(path).unwrap();
        let l1 = gate_and_label(
            &fuse_stack(&pair.t1.semantic, &pair.t1.queries).unwrap(),
            &pair.t1.presence,
            0.5,
        )
        .unwrap();
        let l2 = gate_and_label(
            &fuse_stack(&pair.t2.semantic, &pair.t2.queries).unwrap(),
            &pair.t2.presence,
            0.5,
        )
        .unwrap();
        for (c, name) in pair.vocabulary.iter().enumerate() {
            let written = mask_at(&out.join(mask_file_name(&pair.pair_id, name)));
            assert_eq!(written, detect_changes_pmc(&l1, &l2, c).unwrap());
        }
    }
}

#[test]
fn broken_pair_is_recorded_and_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = write_corpus(&noisy(60), 3, tmp.path().join("c")).unwrap();
    let broken = corpus.manifests[1].parent().unwrap().join("t2.semantic.sfid");
    fs::write(&broken, b"SFID garbage").unwrap();

    let out = tmp.path().join("out");
    let manifest = run(&corpus.scenes, &out, Strategy::Instance);
    assert_eq!((manifest.succeeded, manifest.failed), (2, 1));
    assert!(manifest.has_failures());
    let failed: Vec<_> = manifest
        .pairs
        .iter()
        .filter(|p| p.status == PairStatus::Failed)
        .collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0].error.is_some());
    assert!(failed[0].outputs.is_empty());

    let on_disk: RunManifest =
        serde_json::from_str(&fs::read_to_string(out.join(RUN_MANIFEST)).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
}

#[test]
fn run_manifest_echoes_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = write_corpus(&noisy(70), 1, tmp.path().join("c")).unwrap();
    let out = tmp.path().join("out");
    let manifest = run(&corpus.scenes, &out, Strategy::L2);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join(RUN_MANIFEST)).unwrap()).unwrap();
    for key in [
        "inputs",
        "vocabulary",
        "tau_match",
        "background_threshold",
        "min_area",
        "strategy",
        "baseline_threshold",
        "workers",
        "output",
    ] {
        assert!(v["config"].get(key).is_some(), "{key} missing");
    }
    assert_eq!(v["config"]["strategy"], "l2");
    assert_eq!(manifest.config.workers, 2);

    let replay: RunConfig = serde_json::from_value(v["config"].clone()).unwrap();
    assert_eq!(replay, manifest.config);
}

#[test]
fn vocabulary_override_limits_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = write_corpus(&noisy(80), 1, tmp.path().join("c")).unwrap();
    let pair = load_scene_pair(&corpus.manifests[0]).unwrap();

    let only_tree = RunConfig {
        vocabulary: Some(vec!["tree".into()]),
        ..RunConfig::default()
    };
    let changes = detect_pair(&pair, &only_tree).unwrap();
    assert_eq!(changes.len(), 1);
    assert_eq!(changes[0].category, "tree");
    assert_eq!(changes[0], detect_pair(&pair, &RunConfig::default()).unwrap()[1]);

    let unknown = RunConfig {
        vocabulary: Some(vec!["glacier".into()]),
        ..RunConfig::default()
    };
    assert!(detect_pair(&pair, &unknown).is_err());
}

#[test]
fn invalid_config_aborts_before_work() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        tau_match: 0.0,
        output: tmp.path().join("out"),
        ..RunConfig::default()
    };
    assert!(run_pipeline(&cfg).is_err());
    assert!(!tmp.path().join("out").exists());
}

fn put(dir: &Path, pair: &str, category: &str, rows: &str) {
    fs::create_dir_all(dir).unwrap();
    let mask = BinaryMask::from_rows(rows);
    write_tensor(dir.join(mask_file_name(pair, category)), &Tensor::from(&mask)).unwrap();
}

/// Two pairs, two categories, 2x2 masks. Tallies by hand:
/// a: p1 tp1 fp1 fn1 tn1, p2 tp1 fp3 fn0 tn0 -> tp2 fp4 fn1 tn1
/// b: p1 tn4, p2 fn2 tn2 -> tp0 fp0 fn2 tn6
fn eval_fixture(root: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let (pred, gt) = (root.join("pred"), root.join("gt"));
    put(&pred, "p1", "a", "11/00");
    put(&gt, "p1", "a", "10/10");
    put(&pred, "p2", "a", "11/11");
    put(&gt, "p2", "a", "10/00");
    put(&pred, "p1", "b", "00/00");
    put(&gt, "p1", "b", "00/00");
    put(&pred, "p2", "b", "00/00");
    put(&gt, "p2", "b", "01/10");
    (pred, gt)
}

#[test]
fn eval_matches_hand_tally() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = eval_fixture(tmp.path());
    let report = run_eval(&pred, &gt).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() < 1e-12;

    let a = &report.categories[0];
    assert_eq!(a.category, "a");
    assert_eq!((a.counts.tp, a.counts.fp, a.counts.fn_, a.counts.tn), (2, 4, 1, 1));
    assert!(close(a.iou, 2.0 / 7.0));
    assert!(close(a.precision, 1.0 / 3.0));
    assert!(close(a.recall, 2.0 / 3.0));
    assert!(close(a.f1, 4.0 / 9.0));

    let b = &report.categories[1];
    assert_eq!((b.counts.tp, b.counts.fp, b.counts.fn_, b.counts.tn), (0, 0, 2, 6));
    assert_eq!((b.iou, b.recall, b.f1), (0.0, 0.0, 0.0));

    assert!(close(report.class_average.iou, 1.0 / 7.0));
    assert!(close(report.class_average.f1, 2.0 / 9.0));

    let out = tmp.path().join("report");
    write_report(&report, &out).unwrap();
    let back: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(back["categories"][0]["counts"]["fn"], 1);
    assert!(fs::read_to_string(out.join("report.txt")).unwrap().contains("Class Avg"));
}

#[test]
fn eval_perfect_and_empty_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = write_corpus(&noisy(90), 3, tmp.path().join("c")).unwrap();
    let perfect = run_eval(&corpus.ground_truth, &corpus.ground_truth).unwrap();
    for c in &perfect.categories {
        assert_eq!((c.iou, c.precision, c.recall, c.f1), (1.0, 1.0, 1.0, 1.0));
    }

    let zeros = tmp.path().join("zeros");
    fs::create_dir_all(&zeros).unwrap();
    for entry in fs::read_dir(&corpus.ground_truth).unwrap() {
        let path = entry.unwrap().path();
        let gt = mask_at(&path);
        let (h, w) = gt.dims();
        write_tensor(zeros.join(path.file_name().unwrap()), &Tensor::from(&BinaryMask::zeros(h, w)))
            .unwrap();
    }
    let report = run_eval(&zeros, &corpus.ground_truth).unwrap();
    for c in &report.categories {
        if c.counts.fn_ > 0 {
            assert_eq!(c.iou, 0.0);
        }
    }
    assert!(report.categories.iter().any(|c| c.counts.fn_ > 0));
}

#[test]
fn eval_reports_missing_counterpart_and_shape_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = eval_fixture(tmp.path());
    fs::remove_file(pred.join(mask_file_name("p2", "b"))).unwrap();
    let err = run_eval(&pred, &gt).unwrap_err().to_string();
    assert!(err.contains("p2.b.sfid"), "{err}");

    put(&pred, "p2", "b", "000/000");
    assert!(run_eval(&pred, &gt).is_err());
}
