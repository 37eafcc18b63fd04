mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use csinet::dataset::synthetic::{generate, SyntheticConfig};
use csinet::dataset::{read_container, SampleRecord, Split};
use csinet::model::{NetworkSpec, Tap};
use csinet::train::TrainConfig;
use csinet::{Fingerprint, NUM_SUBCARRIERS};
use csinet_cli::{
    cmd_baseline, cmd_convert, cmd_eval, cmd_export_features, cmd_train, error_code, fnv1a64, BaselineMethod,
    RunManifest, CHECKPOINT_FILE, CURVE_FILE, RUN_MANIFEST_FILE,
};

fn bin(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_csinet"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn small_spec() -> NetworkSpec {
    NetworkSpec { width_multiplier: 0.125, ..NetworkSpec::default() }
}

fn quick_cfg(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, batch_size: 32, seed: 3, ..TrainConfig::default() }
}

fn record(fp: &Fingerprint, split: Split) -> SampleRecord {
    SampleRecord { sample_id: fp.sample_id.clone(), activity: fp.activity, location: fp.location, split }
}

fn write_raw_sample(dir: &Path, id: &str, len: usize) {
    let rows: Vec<String> = (0..NUM_SUBCARRIERS)
        .map(|c| (0..len).map(|t| ((c * 7 + t) % 13).to_string()).collect::<Vec<_>>().join(","))
        .collect();
    fs::write(dir.join(format!("{id}.csv")), rows.join("\n")).unwrap();
}

#[test]
fn convert_writes_container_manifest_and_run_record() {
    let raw = tempfile::tempdir().unwrap();
    fs::write(raw.path().join("labels.csv"), "sample_id,activity,location\ns0,0,0\ns1,1,3\ns2,5,15\n").unwrap();
    for (id, len) in [("s0", 150), ("s1", 192), ("s2", 240)] {
        write_raw_sample(raw.path(), id, len);
    }
    let out = tempfile::tempdir().unwrap();
    let container = out.path().join("data/set.csit");
    assert_eq!(cmd_convert(raw.path(), &container, None, out.path()).unwrap(), 3);
    assert_eq!(read_container(&container).unwrap().count(), 3);
    let manifest = fs::read_to_string(out.path().join("data/manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 4);

    let run = RunManifest::load(&out.path().join(RUN_MANIFEST_FILE)).unwrap();
    assert_eq!(run.command, "convert");
    let expected = format!("{:016x}", fnv1a64(&fs::read(&container).unwrap()));
    assert_eq!(run.dataset_hash.as_deref(), Some(expected.as_str()));
}

#[test]
fn convert_of_empty_directory_fails_with_one_line() {
    let raw = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let err = cmd_convert(raw.path(), &out.path().join("x.csit"), None, out.path()).unwrap_err();
    assert!(format!("{err:#}").contains("zero samples"));

    let (ok, _, stderr) = bin(&[
        "convert",
        raw.path().to_str().unwrap(),
        out.path().join("x.csit").to_str().unwrap(),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert!(!ok);
    assert_eq!(stderr.trim().lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error[E_VALIDATION]: "), "{stderr}");
}

#[test]
fn convert_lists_unknown_annotation_ids() {
    let raw = tempfile::tempdir().unwrap();
    fs::write(raw.path().join("labels.csv"), "sample_id,activity,location\ns0,0,0\n").unwrap();
    write_raw_sample(raw.path(), "s0", 300);
    let ann = raw.path().join("ann.csv");
    fs::write(&ann, "sample_id,start_idx,end_idx\ns0,10,250\nphantom,0,100\n").unwrap();
    let out = tempfile::tempdir().unwrap();
    let err = cmd_convert(raw.path(), &out.path().join("x.csit"), Some(&ann), out.path()).unwrap_err();
    assert_eq!(error_code(&err), "E_VALIDATION");
    assert!(err.to_string().contains("phantom"));
}

#[test]
fn zero_epochs_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let fx = common::synthetic(dir.path(), 1, 0);
    let err = cmd_train(&fx.container, None, &small_spec(), &quick_cfg(0), &dir.path().join("run")).unwrap_err();
    assert_eq!(error_code(&err), "E_CONFIG");
}

#[test]
fn training_twice_with_one_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let fx = common::synthetic(dir.path(), 1, 0);
    let a = cmd_train(&fx.container, None, &small_spec(), &quick_cfg(2), &dir.path().join("a")).unwrap();
    let b = cmd_train(&fx.container, None, &small_spec(), &quick_cfg(2), &dir.path().join("b")).unwrap();
    assert_eq!(a.report.curve.records.len(), 2);
    assert_eq!(fs::read(&a.curve).unwrap(), fs::read(&b.curve).unwrap());
    assert_eq!(fs::read(&a.checkpoint).unwrap(), fs::read(&b.checkpoint).unwrap());
    for name in ["curve_parts.csv", "net.spec", "train.cfg"] {
        assert_eq!(fs::read(dir.path().join("a").join(name)).unwrap(), fs::read(dir.path().join("b").join(name)).unwrap());
    }
    let curve = fs::read_to_string(&a.curve).unwrap();
    assert_eq!(curve.lines().count(), 3);
}

/// Three samples for training and exact copies of them as the test split.
fn memorization_fixture(dir: &Path) -> common::Fixture {
    let all = generate(&SyntheticConfig { repeats: 1, noise: 0.1, ..Default::default() });
    let picked: Vec<Fingerprint> = [0usize, 37, 95].iter().map(|&i| all[i].clone()).collect();
    let mut fps = picked.clone();
    let mut records: Vec<SampleRecord> = picked.iter().map(|f| record(f, Split::Train)).collect();
    for f in &picked {
        let copy = Fingerprint { sample_id: format!("{}_copy", f.sample_id), ..f.clone() };
        records.push(record(&copy, Split::Test));
        fps.push(copy);
    }
    common::write_fingerprints(dir, &fps, &records)
}

#[test]
fn eval_of_a_memorizing_model_is_perfect_and_degrades_without_coords() {
    let dir = tempfile::tempdir().unwrap();
    let fx = memorization_fixture(dir.path());
    let cfg = TrainConfig { epochs: 40, batch_size: 3, seed: 1, ..TrainConfig::default() };
    let run = dir.path().join("run");
    let out = cmd_train(&fx.container, None, &small_spec(), &cfg, &run).unwrap();

    let rows = cmd_eval(&fx.container, None, &out.checkpoint, None, Some(&fx.coords), &dir.path().join("e1")).unwrap();
    assert_eq!(rows[0].accuracy, Some(1.0));
    assert_eq!(rows[1].accuracy, Some(1.0));
    assert_eq!(rows[1].ale_m, Some(0.0));
    assert_eq!(rows[1].ame_m, None);
    for f in ["metrics_activity.csv", "metrics_location.csv", "confusion_activity.csv", "confusion_location.csv"] {
        assert!(dir.path().join("e1").join(f).exists(), "{f}");
    }

    let rows = cmd_eval(&fx.container, None, &out.checkpoint, None, None, &dir.path().join("e2")).unwrap();
    assert_eq!(rows[1].ale_m, None);
    let summary = fs::read_to_string(dir.path().join("e2/summary.csv")).unwrap();
    assert_eq!(summary.lines().nth(2), Some("location,100.00,NA,NA"));
    assert!(dir.path().join("e2/metrics_location.csv").exists());
}

#[test]
fn eval_rejects_a_checkpoint_of_another_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let fx = common::synthetic(dir.path(), 1, 0);
    let run = dir.path().join("run");
    let out = cmd_train(&fx.container, None, &small_spec(), &quick_cfg(1), &run).unwrap();
    let other = dir.path().join("other.spec");
    fs::write(&other, NetworkSpec { width_multiplier: 0.25, ..NetworkSpec::default() }.to_text()).unwrap();
    let err = cmd_eval(&fx.container, None, &out.checkpoint, Some(&other), None, &dir.path().join("e")).unwrap_err();
    assert_eq!(error_code(&err), "E_COMPAT");
}

fn toy_split(dir: &Path, train_labels: &[(usize, usize)], test_labels: &[(usize, usize)]) -> common::Fixture {
    let all = generate(&SyntheticConfig { repeats: 1, ..Default::default() });
    let mut fps = Vec::new();
    let mut records = Vec::new();
    let pairs = train_labels.iter().map(|p| (p, Split::Train)).chain(test_labels.iter().map(|p| (p, Split::Test)));
    for (i, (&(a, l), split)) in pairs.enumerate() {
        let mut fp = all.iter().find(|f| f.activity == a && f.location == l).unwrap().clone();
        fp.sample_id = format!("toy{i}");
        records.push(record(&fp, split));
        fps.push(fp);
    }
    common::write_fingerprints(dir, &fps, &records)
}

#[test]
fn dtw_knn_reports_one_row_per_task() {
    let dir = tempfile::tempdir().unwrap();
    let train: Vec<(usize, usize)> = (0..10).map(|i| (i % 6, i % 4)).collect();
    let fx = toy_split(dir.path(), &train, &[(1, 1), (2, 2)]);
    let out = dir.path().join("b");
    let rows = cmd_baseline(&fx.container, None, BaselineMethod::DtwKnn, None, &out).unwrap();
    assert_eq!(rows.len(), 2);
    let report = fs::read_to_string(out.join("baseline_dtw-knn.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("dtw-knn,activity,"));
    assert!(lines[1].contains("\"k=1 band=8 decimation=3\""));
    assert!(lines[2].starts_with("dtw-knn,location,"));
    assert!(out.join("dtw_distances.dist").exists());
}

#[test]
fn svm_on_a_single_class_fails_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let fx = toy_split(dir.path(), &[(2, 5); 4], &[(2, 5)]);
    let (ok, _, stderr) = bin(&[
        "baseline",
        fx.container.to_str().unwrap(),
        "svm-rbf",
        "--out",
        dir.path().join("b").to_str().unwrap(),
    ]);
    assert!(!ok);
    assert!(stderr.starts_with("error[E_TRAINING]"), "{stderr}");
}

#[test]
fn infeasible_band_and_unknown_method_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let fx = toy_split(dir.path(), &[(0, 0), (1, 1)], &[(0, 0)]);
    // Fingerprints share one length, so only unequal series can violate a band.
    let a = csinet::baselines::Frames::scalar(&[0.0, 1.0, 2.0, 3.0]);
    let b = csinet::baselines::Frames::scalar(&[0.0, 1.0]);
    let err = csinet::baselines::dtw_frames(&a, &b, Some(1)).unwrap_err();
    assert_eq!(err.code(), "E_INFEASIBLE_BAND");

    let cfg = dir.path().join("dtw.cfg");
    fs::write(&cfg, "band=0\nk=1\ndecimation=1\n").unwrap();
    cmd_baseline(&fx.container, None, BaselineMethod::DtwKnn, Some(&cfg), &dir.path().join("b")).unwrap();

    let (ok, _, stderr) = bin(&["baseline", fx.container.to_str().unwrap(), "nearest-centroid"]);
    assert!(!ok);
    assert!(stderr.starts_with("error[E_USAGE]"), "{stderr}");
}

#[test]
fn feature_export_widths_and_tap_validation() {
    let dir = tempfile::tempdir().unwrap();
    let fx = common::synthetic(dir.path(), 1, 0);
    let run = dir.path().join("run");
    let out = cmd_train(&fx.container, None, &small_spec(), &quick_cfg(1), &run).unwrap();
    assert_eq!(out.checkpoint, run.join(CHECKPOINT_FILE));
    assert_eq!(out.curve, run.join(CURVE_FILE));

    let feats = dir.path().join("f");
    let paths = cmd_export_features(
        &fx.container,
        None,
        &out.checkpoint,
        None,
        &[Tap::Input, Tap::OutputActivity, Tap::OutputLocation],
        &feats,
    )
    .unwrap();
    let test_count = 96 / 5;
    let widths: Vec<(usize, usize)> = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).unwrap();
            let rows: Vec<&str> = text.lines().collect();
            (rows.len() - 1, rows[1].split(',').count())
        })
        .collect();
    assert_eq!(widths, vec![(test_count, 1 + 9984), (test_count, 7), (test_count, 17)]);
    assert!(feats.join("features_output-activity.csv").exists());

    let (ok, _, stderr) = bin(&[
        "export-features",
        fx.container.to_str().unwrap(),
        out.checkpoint.to_str().unwrap(),
        "--taps",
        "RB5",
        "--out",
        feats.to_str().unwrap(),
    ]);
    assert!(!ok);
    assert!(stderr.starts_with("error[E_USAGE]"), "{stderr}");
}
