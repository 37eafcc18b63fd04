use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{Context, Result};
use log::{info, warn};

use csinet::baselines::{
    distance_matrix, flatten_features, knn_vote, write_distance_matrix, DtwConfig, MulticlassSvm,
    SvmConfig, REPORT_HEADER,
};
use csinet::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use csinet::config::KeyValues;
use csinet::dataset::{
    self, load_dataset, read_annotations, read_coords, write_container, write_manifest, CsiMatrix,
    DatasetManifest, Split,
};
use csinet::eval::{
    ale, ame, class_metrics, confusion, confusion_csv, location_names, metrics_csv, summary_csv,
    DistanceMode, SummaryRow, ACTIVITY_NAMES,
};
use csinet::model::{NetworkSpec, Tap};
use csinet::nn::Mode;
use csinet::train::{batch_tensor, predict, train, TrainConfig, TrainReport};
use csinet::{Fingerprint, Network32, NUM_ACTIVITIES, NUM_LOCATIONS};

use crate::run::RunManifest;
use crate::UsageError;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const SPEC_FILE: &str = "net.spec";
pub const CURVE_FILE: &str = "curve.csv";
const MANIFEST_FILE: &str = "manifest.csv";

fn default_manifest(container: &Path) -> PathBuf {
    container.with_file_name(MANIFEST_FILE)
}

/// Standardized train and test splits of a container.
pub struct Dataset {
    pub train: Vec<Fingerprint>,
    pub test: Vec<Fingerprint>,
    pub manifest: DatasetManifest,
}

/// Loads a container with its manifest (`manifest.csv` beside the container
/// unless given) and standardizes with statistics of the training split.
pub fn load_standardized(container: &Path, manifest: Option<&Path>) -> Result<Dataset> {
    let manifest_path = manifest.map_or_else(|| default_manifest(container), Path::to_path_buf);
    let (fps, manifest) = load_dataset(container, &manifest_path)
        .with_context(|| format!("loading {}", container.display()))?;
    let fps = if manifest.normalization.is_some() {
        dataset::standardize(&fps, &manifest)?
    } else {
        warn!("no usable training split statistics; amplitudes left unnormalized");
        fps
    };
    let pick = |s| manifest.indices(s).into_iter().map(|i| fps[i].clone()).collect();
    Ok(Dataset {
        train: pick(Split::Train),
        test: pick(Split::Test),
        manifest,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Raw directory to CSIT container plus `manifest.csv` beside it.
pub fn cmd_convert(raw_dir: &Path, out_container: &Path, annotations: Option<&Path>, out_dir: &Path) -> Result<usize> {
    ensure_dir(out_dir)?;
    let mut run = RunManifest::begin("convert", out_dir);
    run.set("raw_dir", raw_dir.display());
    let samples = dataset::raw::read_raw_dir(raw_dir)?;
    let anns = annotations.map(read_annotations).transpose()?;
    if let Some(a) = annotations {
        run.set("annotations", a.display());
    }
    let (container, records) = dataset::raw::convert(&samples, anns.as_deref(), dataset::DEFAULT_SPLIT_PHASE)?;
    if let Some(parent) = out_container.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_container(out_container, &container)?;
    write_manifest(&default_manifest(out_container), &records)?;
    run.set("container", out_container.display());
    run.hash_file(out_container)?;
    run.finish(out_dir)?;
    info!("wrote {} samples to {}", container.count(), out_container.display());
    Ok(container.count())
}

#[derive(Debug)]
pub struct TrainOutputs {
    pub report: TrainReport,
    pub checkpoint: PathBuf,
    pub curve: PathBuf,
}

/// Trains from scratch. The network is initialized with `seed + 1`; the
/// shuffle stream uses `seed + 2`.
pub fn cmd_train(
    container: &Path,
    manifest: Option<&Path>,
    spec: &NetworkSpec,
    cfg: &TrainConfig,
    out_dir: &Path,
) -> Result<TrainOutputs> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let mut run = RunManifest::begin("train", out_dir);
    let data = load_standardized(container, manifest)?;
    run.hash_file(container)?;
    let spec = NetworkSpec { seed: cfg.seed.wrapping_add(1), ..spec.clone() };
    run.seed = Some(cfg.seed);
    run.set("network", &spec);
    for (prefix, text) in [("net", spec.to_text()), ("train", cfg.to_text())] {
        for (k, v) in text.lines().filter_map(|l| l.split_once('=')) {
            run.set(&format!("{prefix}.{k}"), v);
        }
    }
    let mut net = Network32::build(&spec)?;
    info!("{spec}: {} parameters, {} train / {} test samples", net_params(&mut net), data.train.len(), data.test.len());
    let report = train(&mut net, &data.train, &data.test, cfg)?;

    let checkpoint = out_dir.join(CHECKPOINT_FILE);
    let curve = out_dir.join(CURVE_FILE);
    write_checkpoint(&checkpoint, &Checkpoint::from_network(&mut net))?;
    fs::write(out_dir.join(SPEC_FILE), spec.to_text())?;
    fs::write(out_dir.join("train.cfg"), cfg.to_text())?;
    fs::write(&curve, report.curve.to_csv())?;
    fs::write(out_dir.join("curve_parts.csv"), report.curve.parts_csv())?;
    if let Some(reason) = &report.aborted {
        run.set("aborted", reason);
        run.finish(out_dir)?;
        return Err(csinet::Error::Numeric(format!(
            "training stopped after {} epochs: {reason}",
            report.curve.records.len()
        ))
        .into());
    }
    run.finish(out_dir)?;
    Ok(TrainOutputs { report, checkpoint, curve })
}

fn net_params(net: &mut Network32) -> usize {
    use csinet::nn::Parameterized;
    net.num_params()
}

fn load_network(checkpoint: &Path, spec: Option<&Path>) -> Result<Network32> {
    let spec_path = spec.map_or_else(|| checkpoint.with_file_name(SPEC_FILE), Path::to_path_buf);
    let spec = NetworkSpec::load(&spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let mut net = Network32::build(&spec)?;
    read_checkpoint(checkpoint)?.apply_to(&mut net)?;
    Ok(net)
}

/// Test-split metrics for both tasks. Without coordinates the distance
/// columns are reported as not applicable.
pub fn cmd_eval(
    container: &Path,
    manifest: Option<&Path>,
    checkpoint: &Path,
    spec: Option<&Path>,
    coords: Option<&Path>,
    out_dir: &Path,
) -> Result<Vec<SummaryRow>> {
    ensure_dir(out_dir)?;
    let mut run = RunManifest::begin("eval", out_dir);
    run.set("checkpoint", checkpoint.display());
    let mut net = load_network(checkpoint, spec)?;
    let data = load_standardized(container, manifest)?;
    run.hash_file(container)?;
    if data.test.is_empty() {
        return Err(csinet::Error::Config("test split is empty".into()).into());
    }
    let (act_pred, loc_pred) = predict(&mut net, &data.test)?;
    let act_true: Vec<usize> = data.test.iter().map(|f| f.activity).collect();
    let loc_true: Vec<usize> = data.test.iter().map(|f| f.location).collect();

    let act_cm = confusion(&act_pred, &act_true, NUM_ACTIVITIES)?;
    let loc_cm = confusion(&loc_pred, &loc_true, NUM_LOCATIONS)?;
    let act_names: Vec<String> = ACTIVITY_NAMES.iter().map(|s| s.to_string()).collect();
    let loc_names = location_names();
    fs::write(out_dir.join("metrics_activity.csv"), metrics_csv(&act_names, &class_metrics(&act_cm)))?;
    fs::write(out_dir.join("metrics_location.csv"), metrics_csv(&loc_names, &class_metrics(&loc_cm)))?;
    fs::write(out_dir.join("confusion_activity.csv"), confusion_csv(&act_names, &act_cm))?;
    fs::write(out_dir.join("confusion_location.csv"), confusion_csv(&loc_names, &loc_cm))?;

    let (ale_m, ame_m) = match coords {
        Some(path) => {
            run.set("coords", path.display());
            let c = read_coords(path)?;
            (
                Some(ale(&loc_pred, &loc_true, &c, DistanceMode::Euclidean)?),
                ame(&loc_pred, &loc_true, &c, DistanceMode::Euclidean)?,
            )
        }
        None => {
            warn!("no coordinates given; ALE and AME not applicable");
            (None, None)
        }
    };
    let rows = vec![
        SummaryRow { task: "activity".into(), accuracy: act_cm.accuracy(), ale_m: None, ame_m: None },
        SummaryRow { task: "location".into(), accuracy: loc_cm.accuracy(), ale_m, ame_m },
    ];
    fs::write(out_dir.join("summary.csv"), summary_csv(&rows))?;
    run.finish(out_dir)?;
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    DtwKnn,
    SvmRbf,
}

impl FromStr for BaselineMethod {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        match s {
            "dtw-knn" => Ok(Self::DtwKnn),
            "svm-rbf" => Ok(Self::SvmRbf),
            other => Err(UsageError(format!("unknown baseline method '{other}' (dtw-knn, svm-rbf)"))),
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DtwKnn => "dtw-knn",
            Self::SvmRbf => "svm-rbf",
        })
    }
}

fn dtw_config(kv: &KeyValues) -> Result<DtwConfig> {
    kv.reject_unknown(&["k", "band", "decimation"])?;
    let d = DtwConfig::default();
    let band_radius = match kv.get("band") {
        None => d.band_radius,
        Some("none") => None,
        Some(_) => kv.parsed("band")?,
    };
    let cfg = DtwConfig {
        band_radius,
        k: kv.parsed("k")?.unwrap_or(d.k),
        decimation: kv.parsed("decimation")?.unwrap_or(d.decimation),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn svm_config(kv: &KeyValues) -> Result<SvmConfig> {
    kv.reject_unknown(&["c", "gamma", "tolerance", "max_passes"])?;
    let d = SvmConfig::default();
    let cfg = SvmConfig {
        c: kv.parsed("c")?.unwrap_or(d.c),
        gamma: kv.parsed("gamma")?.or(d.gamma),
        tolerance: kv.parsed("tolerance")?.unwrap_or(d.tolerance),
        max_passes: kv.parsed("max_passes")?.unwrap_or(d.max_passes),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len().max(1) as f64
}

/// Evaluates a baseline on both tasks and writes `baseline_<method>.csv`.
/// Returns `(task, accuracy)` pairs.
pub fn cmd_baseline(
    container: &Path,
    manifest: Option<&Path>,
    method: BaselineMethod,
    config: Option<&Path>,
    out_dir: &Path,
) -> Result<Vec<(String, f64)>> {
    ensure_dir(out_dir)?;
    let mut run = RunManifest::begin("baseline", out_dir);
    run.set("method", method);
    let kv = match config {
        Some(p) => KeyValues::parse(&fs::read_to_string(p)?)?,
        None => KeyValues::default(),
    };
    let data = load_standardized(container, manifest)?;
    run.hash_file(container)?;
    if data.train.is_empty() || data.test.is_empty() {
        return Err(csinet::Error::Config("baselines need non-empty train and test splits".into()).into());
    }
    let train_x: Vec<&CsiMatrix<f32>> = data.train.iter().map(|f| &f.amplitudes).collect();
    let test_x: Vec<&CsiMatrix<f32>> = data.test.iter().map(|f| &f.amplitudes).collect();
    let labels = |set: &[Fingerprint], task: &str| -> Vec<usize> {
        set.iter().map(|f| if task == "activity" { f.activity } else { f.location }).collect()
    };

    let mut rows = Vec::new();
    match method {
        BaselineMethod::DtwKnn => {
            let cfg = dtw_config(&kv)?;
            let start = Instant::now();
            let dist = distance_matrix(&test_x, &train_x, &cfg)?;
            let shared = start.elapsed().as_secs_f64();
            write_distance_matrix(&out_dir.join("dtw_distances.dist"), &dist)?;
            for task in ["activity", "location"] {
                let t0 = Instant::now();
                let train_y = labels(&data.train, task);
                let pred = (0..dist.rows)
                    .map(|i| knn_vote(dist.row(i), &train_y, cfg.k))
                    .collect::<csinet::Result<Vec<_>>>()?;
                let secs = shared + t0.elapsed().as_secs_f64();
                rows.push((task.to_string(), accuracy(&pred, &labels(&data.test, task)), cfg.to_string(), secs));
            }
        }
        BaselineMethod::SvmRbf => {
            let cfg = svm_config(&kv)?;
            let train_f = flatten_features(&train_x);
            let test_f = flatten_features(&test_x);
            for task in ["activity", "location"] {
                let t0 = Instant::now();
                let model = MulticlassSvm::train(&train_f, &labels(&data.train, task), &cfg)?;
                let pred = model.predict_all(&test_f);
                let secs = t0.elapsed().as_secs_f64();
                let resolved = SvmConfig { gamma: Some(model.gamma), ..cfg.clone() };
                rows.push((task.to_string(), accuracy(&pred, &labels(&data.test, task)), resolved.to_string(), secs));
            }
        }
    }
    let mut csv = format!("{REPORT_HEADER}\n");
    for (task, acc, conf, secs) in &rows {
        csv.push_str(&format!("{method},{task},{acc:.4},\"{conf}\",{secs:.3}\n"));
        info!("{method} {task}: accuracy {acc:.4} ({conf})");
    }
    fs::write(out_dir.join(format!("baseline_{method}.csv")), csv)?;
    if let Some((_, conf, ..)) = rows.first().map(|r| (&r.0, &r.2)) {
        run.set("config", conf);
    }
    run.finish(out_dir)?;
    Ok(rows.into_iter().map(|(t, a, ..)| (t, a)).collect())
}

/// One CSV per tap over the test split: `sample_id` then the flattened
/// activation.
pub fn cmd_export_features(
    container: &Path,
    manifest: Option<&Path>,
    checkpoint: &Path,
    spec: Option<&Path>,
    taps: &[Tap],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if taps.is_empty() {
        return Err(UsageError("at least one tap is required".into()).into());
    }
    ensure_dir(out_dir)?;
    let mut run = RunManifest::begin("export-features", out_dir);
    run.set("taps", taps.iter().map(Tap::to_string).collect::<Vec<_>>().join(","));
    let mut net = load_network(checkpoint, spec)?;
    let data = load_standardized(container, manifest)?;
    run.hash_file(container)?;

    let mut outputs: Vec<String> = vec![String::new(); taps.len()];
    for (start, chunk) in data.test.chunks(64).enumerate() {
        let idx: Vec<usize> = (0..chunk.len()).collect();
        let x = batch_tensor::<f32>(chunk, &idx)?;
        let (_, _, maps) = net.forward_with_taps(&x, Mode::Eval, taps)?;
        for (t, tap) in taps.iter().enumerate() {
            let m = &maps[tap];
            let width = m.len() / chunk.len();
            let out = &mut outputs[t];
            if start == 0 {
                out.push_str("sample_id");
                for j in 0..width {
                    out.push_str(&format!(",f{j}"));
                }
                out.push('\n');
            }
            for (i, fp) in chunk.iter().enumerate() {
                out.push_str(&fp.sample_id);
                for v in &m.data()[i * width..][..width] {
                    out.push(',');
                    out.push_str(&v.to_string());
                }
                out.push('\n');
            }
        }
    }
    let mut paths = Vec::new();
    for (tap, text) in taps.iter().zip(outputs) {
        let path = out_dir.join(format!("features_{tap}.csv"));
        fs::write(&path, text)?;
        paths.push(path);
    }
    run.finish(out_dir)?;
    Ok(paths)
}
