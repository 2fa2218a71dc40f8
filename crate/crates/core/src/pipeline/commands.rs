use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rayon::prelude::*;

use crate::classifier::{ConfusionMatrix, FeatureMap, GaussianClassifier};
use crate::dataset::{load_idx_images, load_idx_labels, preprocess_with, Dataset, Sample};
use crate::error::{Error, Result};
use crate::fem::GridMesh;
use crate::forest::{generate_axes, orthonormalize, AxisBundle, BinaryTask};

use super::config::{PipelineConfig, TaskMode};
use super::formats::{
    decode_axes, decode_fields, decode_model, element_raster, encode_axes, encode_fields,
    encode_model, node_raster, read_text, write_raster, write_text, ModelFile, AXES_HEADER,
    FIELDS_HEADER, MODEL_HEADER,
};
use super::report::{
    write_confusion_csv, write_histogram_csv, write_json, EvalReport, RunReport, Timing,
};

pub const AXES_FILE: &str = "axes.txt";
pub const FOREST_FILE: &str = "forest.txt";
pub const FIELDS_FILE: &str = "fields.txt";
pub const MODEL_FILE: &str = "model.txt";
pub const REPORT_FILE: &str = "report.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`, expected train or test"))),
        }
    }
}

/// Loads one split restricted to the configured classes, labels replaced by
/// class positions. Only the training split honours `train_limit`.
pub fn load_split(cfg: &PipelineConfig, split: Split) -> Result<Dataset> {
    let (imgs, labs) = match split {
        Split::Train => (&cfg.train_images, &cfg.train_labels),
        Split::Test => (&cfg.test_images, &cfg.test_labels),
    };
    let images = load_idx_images(cfg.resolve(imgs))?;
    let labels = load_idx_labels(cfg.resolve(labs))?;
    if images.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    let classes = cfg.mode.classes();
    let limit = match split {
        Split::Train => cfg.train_limit,
        Split::Test => None,
    };
    let mut samples = Vec::new();
    for (img, &l) in images.iter().zip(&labels) {
        if limit.is_some_and(|n| samples.len() >= n) {
            break;
        }
        if let Some(pos) = classes.iter().position(|&c| c == l) {
            if (img.rows(), img.cols()) != (cfg.n1, cfg.n2) {
                return Err(Error::DimensionMismatch(format!(
                    "images are {}x{}, the mesh is {}x{}",
                    img.rows(),
                    img.cols(),
                    cfg.n1,
                    cfg.n2
                )));
            }
            samples.push(Sample {
                gray: preprocess_with(img, cfg.preprocess)?,
                label: pos,
            });
        }
    }
    let data = Dataset::new(cfg.n1, cfg.n2, classes.len(), samples)?;
    if let Some(j) = data.class_counts().iter().position(|&c| c == 0) {
        return Err(Error::Config(format!(
            "digit {} has no samples in the {split} split",
            classes[j]
        )));
    }
    Ok(data)
}

struct ForestJob {
    name: String,
    indices: Vec<usize>,
    positive: Vec<bool>,
    kind: crate::optimizer::RefKind,
}

fn forest_jobs(cfg: &PipelineConfig, data: &Dataset) -> Vec<ForestJob> {
    let classes = cfg.mode.classes();
    let pos = |d: usize| classes.iter().position(|&c| c == d).expect("digit is configured");
    let mut tasks = Vec::new();
    match &cfg.mode {
        TaskMode::Pairs(pairs) => {
            for &(a, b) in pairs {
                let (ia, ib) = (pos(a), pos(b));
                let indices: Vec<usize> = (0..data.len())
                    .filter(|&i| {
                        let l = data.sample(i).label;
                        l == ia || l == ib
                    })
                    .collect();
                let positive: Vec<bool> = indices.iter().map(|&i| data.sample(i).label == ib).collect();
                tasks.push((format!("{a}v{b}"), indices, positive));
            }
        }
        TaskMode::OneVsRest(list) => {
            for &d in list {
                let id = pos(d);
                let indices: Vec<usize> = (0..data.len()).collect();
                let positive: Vec<bool> = indices.iter().map(|&i| data.sample(i).label == id).collect();
                tasks.push((format!("{d}vrest"), indices, positive));
            }
        }
    }
    let mut jobs = Vec::new();
    for (name, indices, positive) in tasks {
        for &kind in &cfg.ref_kinds {
            jobs.push(ForestJob {
                name: format!("{name}/{kind}"),
                indices: indices.clone(),
                positive: positive.clone(),
                kind,
            });
        }
    }
    jobs
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))
}

/// The forests as generated and the bundle used for features.
#[derive(Debug, Clone)]
pub struct TrainedAxes {
    pub forest: AxisBundle,
    pub axes: AxisBundle,
}

fn train_axes_on(cfg: &PipelineConfig, data: &Dataset, out: &Path, jobs: usize) -> Result<TrainedAxes> {
    let mesh = GridMesh::new(cfg.n1, cfg.n2);
    let work = forest_jobs(cfg, data);
    let bundles = thread_pool(jobs)?.install(|| {
        work.par_iter()
            .map(|job| {
                let samples: Vec<&[f64]> =
                    job.indices.iter().map(|&i| data.sample(i).gray.as_slice()).collect();
                let task = BinaryTask::new(&samples, &job.positive)?;
                let opt = crate::optimizer::OptimizerConfig {
                    ref_kind: job.kind,
                    ..cfg.optimizer.clone()
                };
                let b = generate_axes(&task, cfg.n_axes, &opt, &mesh).map_err(|e| {
                    Error::Config(format!("forest {}: {e}", job.name))
                })?;
                info!("forest {}: {} axes", job.name, b.len());
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let forest = AxisBundle::concat(bundles)?;
    let axes = if cfg.svd_k > 0 {
        orthonormalize(&forest, cfg.svd_k)?
    } else {
        forest.clone()
    };
    write_text(&out.join(AXES_FILE), &encode_axes(&axes))?;
    write_text(&out.join(FOREST_FILE), &encode_axes(&forest))?;
    write_text(&out.join(FIELDS_FILE), &encode_fields(cfg.n1, cfg.n2, &forest.fields))?;
    Ok(TrainedAxes { forest, axes })
}

/// Grows the configured forests and writes the axis bundle.
pub fn train_axes(cfg: &PipelineConfig, out: &Path, jobs: usize) -> Result<TrainedAxes> {
    let data = load_split(cfg, Split::Train).map_err(|e| e.in_stage("load"))?;
    train_axes_on(cfg, &data, out, jobs).map_err(|e| e.in_stage("train-axes"))
}

fn features(map: &FeatureMap, data: &Dataset) -> Vec<Vec<f64>> {
    data.samples().iter().map(|s| map.map(&s.gray)).collect()
}

fn train_on(cfg: &PipelineConfig, data: &Dataset, out: &Path) -> Result<ModelFile> {
    let bundle = decode_axes(&read_text(&out.join(AXES_FILE))?)?;
    let mesh = GridMesh::new(bundle.n1, bundle.n2);
    let map = FeatureMap::new(&mesh, &bundle.axes)?;
    let z = features(&map, data);
    let labels: Vec<usize> = data.samples().iter().map(|s| s.label).collect();
    let classifier = GaussianClassifier::fit(&z, &labels, data.n_classes(), cfg.ridge)?;
    let model = ModelFile {
        classifier,
        labels: cfg.mode.classes(),
        bundle: AXES_FILE.to_string(),
        config: cfg.to_text(),
    };
    write_text(&out.join(MODEL_FILE), &encode_model(&model))?;
    Ok(model)
}

/// Fits the classifier on features of the training split.
pub fn train(cfg: &PipelineConfig, out: &Path) -> Result<ModelFile> {
    let data = load_split(cfg, Split::Train).map_err(|e| e.in_stage("load"))?;
    train_on(cfg, &data, out).map_err(|e| e.in_stage("train"))
}

fn eval_on(data: &Dataset, out: &Path, split: Split) -> Result<EvalReport> {
    let model = decode_model(&read_text(&out.join(MODEL_FILE))?)?;
    let bundle = decode_axes(&read_text(&out.join(&model.bundle))?)?;
    if bundle.len() != model.classifier.dim() {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features, bundle has {} axes",
            model.classifier.dim(),
            bundle.len()
        )));
    }
    if model.labels.len() != data.n_classes() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} classes, data has {}",
            model.labels.len(),
            data.n_classes()
        )));
    }
    let mesh = GridMesh::new(bundle.n1, bundle.n2);
    let map = FeatureMap::new(&mesh, &bundle.axes)?;
    let z = features(&map, data);
    let target: Vec<usize> = data.samples().iter().map(|s| s.label).collect();
    let posteriors: Vec<Vec<f64>> = z.iter().map(|v| model.classifier.posterior(v)).collect();
    let predicted: Vec<usize> = z.iter().map(|v| model.classifier.predict(v)).collect();
    let m = ConfusionMatrix::from_predictions(&predicted, &target, data.n_classes())?;

    let dir = out.join(split.as_str());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_confusion_csv(&dir.join("confusion.csv"), &model.labels, &m)?;
    let pred_path = dir.join("predictions.csv");
    let mut w = csv::Writer::from_path(&pred_path).map_err(|e| super::formats::csv_error(&pred_path, e))?;
    let mut header = vec!["index".to_string(), "target".into(), "predicted".into()];
    header.extend(model.labels.iter().map(|l| format!("p_{l}")));
    w.write_record(&header).map_err(|e| super::formats::csv_error(&pred_path, e))?;
    for (i, ((t, p), post)) in target.iter().zip(&predicted).zip(&posteriors).enumerate() {
        let mut rec = vec![i.to_string(), model.labels[*t].to_string(), model.labels[*p].to_string()];
        rec.extend(post.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| super::formats::csv_error(&pred_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&pred_path, e))?;
    for k in 0..map.dim() {
        let values: Vec<f64> = z.iter().map(|v| v[k]).collect();
        write_histogram_csv(&dir.join(format!("hist_axis_{k:03}.csv")), &model.labels, &values, &target)?;
    }
    let report = EvalReport::new(split.as_str(), &model.labels, &m);
    write_json(&dir.join(REPORT_FILE), &report)?;
    info!("{split}: accuracy {:.4} on {} samples", report.accuracy, report.samples);
    Ok(report)
}

/// Scores the saved model on one split and writes the evaluation files.
pub fn eval(cfg: &PipelineConfig, out: &Path, split: Split) -> Result<EvalReport> {
    let data = load_split(cfg, split).map_err(|e| e.in_stage("load"))?;
    eval_on(&data, out, split).map_err(|e| e.in_stage("eval"))
}

fn inspect_bundle(bundle: &AxisBundle, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    for (m, a) in bundle.axes.iter().enumerate() {
        let (w, h, r) = node_raster(bundle.n1, bundle.n2, a);
        let name = format!("axis_{m:03}");
        write_raster(out, &name, w, h, &r)?;
        written.push(out.join(format!("{name}.pgm")));
    }
    Ok(())
}

fn inspect_fields(text: &str, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let (n1, n2, fields) = decode_fields(text)?;
    for (m, f) in fields.iter().enumerate() {
        for (tag, v) in [("p", &f.design.p), ("q", &f.design.q)] {
            let (w, h, r) = element_raster(n1, n2, v);
            let name = format!("{tag}_{m:03}");
            write_raster(out, &name, w, h, &r)?;
            written.push(out.join(format!("{name}.pgm")));
        }
        for (tag, v) in [("f", &f.f), ("g", &f.g)] {
            let (w, h, r) = node_raster(n1, n2, v);
            let name = format!("{tag}_{m:03}");
            write_raster(out, &name, w, h, &r)?;
            written.push(out.join(format!("{name}.pgm")));
        }
    }
    Ok(())
}

/// Renders axes, design fields and mean loads found in an axis, fields or
/// model file as PGM images with CSV values. Returns the images written.
pub fn inspect(path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let run = || -> Result<Vec<PathBuf>> {
        let text = read_text(path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut written = Vec::new();
        let header = text.lines().next().unwrap_or("").trim();
        let axes_path = if header == AXES_HEADER {
            Some(path.to_path_buf())
        } else if header == MODEL_HEADER {
            Some(dir.join(decode_model(&text)?.bundle))
        } else if header == FIELDS_HEADER {
            inspect_fields(&text, out, &mut written)?;
            None
        } else {
            return Err(Error::format("inspect", format!("unrecognized header `{header}`")));
        };
        if let Some(p) = axes_path {
            inspect_bundle(&decode_axes(&read_text(&p)?)?, out, &mut written)?;
            let fields = p.parent().unwrap_or(Path::new(".")).join(FIELDS_FILE);
            if fields.exists() {
                inspect_fields(&read_text(&fields)?, out, &mut written)?;
            }
        }
        Ok(written)
    };
    run().map_err(|e| e.in_stage("inspect"))
}

/// Axes, classifier and both evaluations in one go.
pub fn pipeline(cfg: &PipelineConfig, out: &Path, jobs: usize) -> Result<RunReport> {
    let mut timing = Timing::default();
    let mut clock = Instant::now();
    let mut lap = |timing: &mut Timing, stage: &str| {
        timing.stages.push((stage.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };
    let train_data = load_split(cfg, Split::Train).map_err(|e| e.in_stage("load"))?;
    let test_data = load_split(cfg, Split::Test).map_err(|e| e.in_stage("load"))?;
    lap(&mut timing, "load");
    let trained = train_axes_on(cfg, &train_data, out, jobs).map_err(|e| e.in_stage("train-axes"))?;
    lap(&mut timing, "train-axes");
    train_on(cfg, &train_data, out).map_err(|e| e.in_stage("train"))?;
    lap(&mut timing, "train");
    let train = eval_on(&train_data, out, Split::Train).map_err(|e| e.in_stage("eval"))?;
    let test = eval_on(&test_data, out, Split::Test).map_err(|e| e.in_stage("eval"))?;
    lap(&mut timing, "eval");
    let report = RunReport {
        config: cfg.to_text(),
        labels: cfg.mode.classes(),
        axes_generated: trained.forest.len(),
        exhausted: trained.forest.exhausted,
        feature_dim: trained.axes.len(),
        axes: trained.forest.provenance.clone(),
        train,
        test,
    };
    write_json(&out.join(REPORT_FILE), &report).map_err(|e| e.in_stage("report"))?;
    write_json(&out.join(TIMING_FILE), &timing).map_err(|e| e.in_stage("report"))?;
    Ok(report)
}
