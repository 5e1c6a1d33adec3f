//! The single-vs-simultaneous pipeline: load a split, train a detector,
//! write detections, and compare the two conditions.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{AnchorSpec, ClassSelection, RunConfig};
use crate::data::{image_to_tensor, read_annotations, read_pnm, DatasetManifest, ManifestEntry, Split};
use crate::detfile::DetectionRecord;
use crate::error::{Error, Result};
use crate::head::{class_name, decode, nms, BBox, IRIS, PERIOCULAR};
use crate::metrics::{evaluate, merge_single_class, EvalOptions, EvalReport, ImageTruth};
use crate::network::{Anchor, NetworkConfig, DEFAULT_ANCHORS};
use crate::stats::{wilcoxon_signed_rank_with, WilcoxonMethod, WilcoxonResult, DEFAULT_ALPHA};
use crate::training::{assign_targets, kmeans_anchors, train, Sample};
use crate::{Model, TensorT};

/// Ground truth of every image in `split`, in manifest order.
pub fn load_truth(manifest: &DatasetManifest, split: Split) -> Result<Vec<ImageTruth>> {
    manifest
        .split(split)
        .map(|e| {
            Ok(ImageTruth {
                image_id: e.image_id.clone(),
                objects: read_annotations(manifest.resolve(&e.annotation_path))?,
            })
        })
        .collect()
}

fn load_image(manifest: &DatasetManifest, entry: &ManifestEntry, net: &NetworkConfig) -> Result<TensorT<f32>> {
    let image = read_pnm(manifest.resolve(&entry.image_path))?;
    image_to_tensor(&image, net.input_channels, net.input_size)
}

/// Boxes of the selected classes, relabelled to model class ids.
fn model_boxes(truth: &ImageTruth, classes: ClassSelection) -> Vec<(usize, BBox)> {
    truth
        .objects
        .iter()
        .filter_map(|o| classes.to_model(o.class_id).map(|c| (c, o.bbox)))
        .collect()
}

/// Priors for `classes` under `config`: defaults, explicit, or k-means over
/// the selected training boxes (grid-cell units).
pub fn resolve_anchors(
    config: &RunConfig,
    truth: &[ImageTruth],
    classes: ClassSelection,
) -> Result<Vec<Anchor>> {
    match &config.anchors {
        AnchorSpec::Default => Ok(DEFAULT_ANCHORS.to_vec()),
        AnchorSpec::Explicit(a) => Ok(a.clone()),
        AnchorSpec::KMeans => {
            let grid = (config.resolved_input_size() / 32) as f64;
            let sizes: Vec<(f64, f64)> = truth
                .iter()
                .flat_map(|t| model_boxes(t, classes))
                .map(|(_, b)| (b.w * grid, b.h * grid))
                .collect();
            kmeans_anchors(&sizes, config.num_anchors)
        }
    }
}

pub fn load_samples(
    manifest: &DatasetManifest,
    split: Split,
    classes: ClassSelection,
    net: &NetworkConfig,
) -> Result<Vec<Sample>> {
    let truth = load_truth(manifest, split)?;
    manifest
        .split(split)
        .zip(&truth)
        .map(|(entry, t)| {
            Ok(Sample {
                image: load_image(manifest, entry, net)?,
                targets: assign_targets(&model_boxes(t, classes), net)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainedDetector {
    pub model: Model,
    pub history: Vec<f64>,
    /// Input configuration with the resolved anchors and class selection.
    pub config: RunConfig,
}

impl TrainedDetector {
    pub fn classes(&self) -> ClassSelection {
        self.config.classes.expect("trained detector records its classes")
    }
}

/// Trains on the manifest's training split.
pub fn train_detector(
    manifest: &DatasetManifest,
    classes: ClassSelection,
    config: &RunConfig,
    on_epoch: impl FnMut(usize, f64),
) -> Result<TrainedDetector> {
    config.validate()?;
    let truth = load_truth(manifest, Split::Train)?;
    if truth.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let anchors = resolve_anchors(config, &truth, classes)?;
    let net = config.network(classes.num_classes(), anchors.clone())?;
    let samples = load_samples(manifest, Split::Train, classes, &net)?;
    let mut model = Model::build(&net, config.init_seed)?;
    let history = train(&mut model, &samples, &config.train, on_epoch)?;
    Ok(TrainedDetector {
        model,
        history,
        config: RunConfig {
            anchors: AnchorSpec::Explicit(anchors),
            input_size: Some(net.input_size),
            classes: Some(classes),
            ..config.clone()
        },
    })
}

/// Path of the configuration written next to a weights file.
pub fn sidecar_path(weights: &Path) -> PathBuf {
    let mut s = weights.as_os_str().to_owned();
    s.push(".cfg");
    PathBuf::from(s)
}

impl TrainedDetector {
    /// Writes the weights and their configuration sidecar.
    pub fn save(&self, weights: &Path) -> Result<()> {
        self.model.save_weights(weights)?;
        self.config.write(sidecar_path(weights))
    }

    /// Loads weights with the configuration in `config`, or the sidecar
    /// when `None`.
    pub fn load(weights: &Path, config: Option<&Path>) -> Result<Self> {
        let cfg_path = config.map_or_else(|| sidecar_path(weights), Path::to_path_buf);
        let config = RunConfig::read(&cfg_path)?;
        let classes = config.classes.ok_or_else(|| {
            Error::format(cfg_path.display().to_string(), "configuration does not record `classes`")
        })?;
        let AnchorSpec::Explicit(anchors) = &config.anchors else {
            return Err(Error::format(
                cfg_path.display().to_string(),
                "configuration must list explicit anchors",
            ));
        };
        let net = config.network(classes.num_classes(), anchors.clone())?;
        let mut model = Model::build(&net, config.init_seed)?;
        model.load_weights(weights)?;
        Ok(TrainedDetector {
            model,
            history: Vec::new(),
            config,
        })
    }
}

/// Smallest clipped side kept in detection files.
pub const MIN_BOX_SIDE: f64 = 1e-6;

/// Detections for every image of `split`, in manifest order, with dataset
/// class ids. Boxes are clipped to the image; boxes that vanish (or were
/// never finite) are dropped.
pub fn detect_split(detector: &TrainedDetector, manifest: &DatasetManifest, split: Split) -> Result<Vec<DetectionRecord>> {
    let net = detector.model.config();
    let classes = detector.classes();
    let mut out = Vec::new();
    for entry in manifest.split(split) {
        let x = load_image(manifest, entry, net)?;
        let raw = detector.model.forward(&x)?;
        let dets = decode(&raw, net, detector.config.conf_threshold)?;
        let dets: Vec<_> = dets
            .into_iter()
            .filter_map(|mut d| {
                d.bbox = d.bbox.clipped()?;
                (d.bbox.w >= MIN_BOX_SIDE && d.bbox.h >= MIN_BOX_SIDE).then_some(d)
            })
            .collect();
        for mut d in nms(&dets, detector.config.nms_threshold) {
            d.class_id = classes.to_dataset(d.class_id);
            out.push(DetectionRecord::new(entry.image_id.clone(), d));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassComparison {
    pub class_id: usize,
    pub multi_mean_iou: f64,
    pub single_mean_iou: f64,
    pub test: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub multi: EvalReport,
    pub single: EvalReport,
    pub comparisons: Vec<ClassComparison>,
}

/// Evaluates both conditions on `truth` and runs the Wilcoxon test on the
/// paired per-image IoU series of each class.
pub fn compare(
    multi: &[DetectionRecord],
    single_iris: Vec<DetectionRecord>,
    single_peri: Vec<DetectionRecord>,
    truth: &[ImageTruth],
    options: &EvalOptions,
) -> Result<CompareReport> {
    let classes = [IRIS, PERIOCULAR];
    let multi_report = evaluate(multi, truth, &classes, options)?;
    let single = merge_single_class(single_iris, single_peri)?;
    let single_report = evaluate(&single, truth, &classes, options)?;
    let mut comparisons = Vec::new();
    for (m, s) in multi_report.classes.iter().zip(&single_report.classes) {
        let a: Vec<f64> = m.per_image_iou.iter().map(|(_, v)| *v).collect();
        let b: Vec<f64> = s.per_image_iou.iter().map(|(_, v)| *v).collect();
        if a.is_empty() {
            continue;
        }
        comparisons.push(ClassComparison {
            class_id: m.class_id,
            multi_mean_iou: m.mean_iou,
            single_mean_iou: s.mean_iou,
            test: wilcoxon_signed_rank_with(&a, &b, WilcoxonMethod::Auto, DEFAULT_ALPHA)?,
        });
    }
    Ok(CompareReport {
        multi: multi_report,
        single: single_report,
        comparisons,
    })
}

impl ClassComparison {
    pub fn verdict(&self) -> &'static str {
        match (self.test.significant, self.multi_mean_iou >= self.single_mean_iou) {
            (false, _) => "no statistically significant difference",
            (true, true) => "multi significantly better",
            (true, false) => "single significantly better",
        }
    }
}

impl CompareReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("[multi]\n");
        s.push_str(&self.multi.to_text());
        s.push_str("\n[single]\n");
        s.push_str(&self.single.to_text());
        s.push_str("\n[wilcoxon]\n");
        let _ = writeln!(
            s,
            "{:<12} {:>9} {:>9} {:>5} {:>10} {:>12} {:>20}  verdict",
            "class", "multi_iou", "single_iou", "n", "W", "p_value", "method"
        );
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "{:<12} {:>9.6} {:>9.6} {:>5} {:>10.1} {:>12.6e} {:>20}  {}",
                class_name(c.class_id),
                c.multi_mean_iou,
                c.single_mean_iou,
                c.test.n_effective,
                c.test.statistic,
                c.test.p_value,
                c.test.method.name(),
                c.verdict()
            );
        }
        let _ = writeln!(s, "alpha = {}", DEFAULT_ALPHA);
        s
    }
}
