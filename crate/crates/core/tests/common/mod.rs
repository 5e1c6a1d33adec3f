//! Independent reference implementations shared by the integration and
//! acceptance tests.
#![allow(dead_code)]

use ocular::data::Annotation;
use ocular::detfile::DetectionRecord;
use ocular::head::{BBox, Detection};
use ocular::metrics::ImageTruth;
use ocular::network::{Anchor, NetworkConfig, Profile};
use ocular::ops::{
    batchnorm_backward, batchnorm_train, conv2d_backward, conv2d_forward, leaky_relu, leaky_relu_backward,
    maxpool2, maxpool2_backward, BatchNormParams, ConvParams,
};
use ocular::training::{assign_targets, detection_loss, TargetMap, TrainConfig};
use ocular::{Shape, Tensor64};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type TestRng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> TestRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

// ---------------------------------------------------------------- gradients

pub const FD_STEP: f64 = 1e-4;
pub const GRAD_TOLERANCE: f64 = 1e-5;

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let up = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `max |a − n| / max(max |a|, max |n|)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()))
        / scale
}

fn random_vec(rng: &mut TestRng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

fn tensor(shape: Shape, data: Vec<f64>) -> Tensor64 {
    Tensor64::from_vec(shape, data).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Worst relative error over the input, weight and bias gradients of a
/// random convolution under a random linear functional of its output.
pub fn conv_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let k = if seed % 2 == 0 { 3 } else { 1 };
    let (n, cin, cout) = (r.random_range(1..3), r.random_range(1..4), r.random_range(1..4));
    let (h, w) = (r.random_range(1..6), r.random_range(1..6));
    let in_shape = Shape::new(n, cin, h, w);
    let w_shape = Shape::new(cout, cin, k, k);
    let x = random_vec(&mut r, in_shape.len(), -1.0, 1.0);
    let wt = random_vec(&mut r, w_shape.len(), -1.0, 1.0);
    let b = random_vec(&mut r, cout, -1.0, 1.0);
    let out_shape = Shape::new(n, cout, h, w);
    let probe = random_vec(&mut r, out_shape.len(), -1.0, 1.0);

    let loss = |x: &[f64], wt: &[f64], b: &[f64]| {
        let p = ConvParams::new(tensor(w_shape, wt.to_vec()), b.to_vec()).unwrap();
        dot(conv2d_forward(&tensor(in_shape, x.to_vec()), &p).unwrap().data(), &probe)
    };
    let params = ConvParams::new(tensor(w_shape, wt.clone()), b.clone()).unwrap();
    let g = conv2d_backward(&tensor(in_shape, x.clone()), &params, &tensor(out_shape, probe.clone())).unwrap();
    let ex = relative_error(g.input.unwrap().data(), &numeric_gradient(&x, |v| loss(v, &wt, &b)));
    let ew = relative_error(g.weights.data(), &numeric_gradient(&wt, |v| loss(&x, v, &b)));
    let eb = relative_error(&g.bias, &numeric_gradient(&b, |v| loss(&x, &wt, v)));
    ex.max(ew).max(eb)
}

/// Batch norm in training mode: input, gamma and beta gradients.
pub fn batchnorm_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = Shape::new(r.random_range(1..4), r.random_range(1..4), r.random_range(1..4), r.random_range(2..4));
    let c = shape.c;
    let x = random_vec(&mut r, shape.len(), -2.0, 2.0);
    let gamma = random_vec(&mut r, c, 0.5, 1.5);
    let beta = random_vec(&mut r, c, -0.5, 0.5);
    let probe = random_vec(&mut r, shape.len(), -1.0, 1.0);
    let params = |gamma: &[f64], beta: &[f64]| BatchNormParams {
        gamma: gamma.to_vec(),
        beta: beta.to_vec(),
        ..BatchNormParams::identity(c)
    };
    let loss = |x: &[f64], gamma: &[f64], beta: &[f64]| {
        let (out, _) = batchnorm_train(&tensor(shape, x.to_vec()), &mut params(gamma, beta)).unwrap();
        dot(out.data(), &probe)
    };
    let p = params(&gamma, &beta);
    let (_, cache) = batchnorm_train(&tensor(shape, x.clone()), &mut p.clone()).unwrap();
    let g = batchnorm_backward(&tensor(shape, probe.clone()), &cache, &p).unwrap();
    let ex = relative_error(g.input.data(), &numeric_gradient(&x, |v| loss(v, &gamma, &beta)));
    let eg = relative_error(&g.gamma, &numeric_gradient(&gamma, |v| loss(&x, v, &beta)));
    let eb = relative_error(&g.beta, &numeric_gradient(&beta, |v| loss(&x, &gamma, v)));
    ex.max(eg).max(eb)
}

/// Inputs are kept at least 1e-2 away from the kink.
pub fn leaky_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = Shape::new(r.random_range(1..3), r.random_range(1..4), r.random_range(1..5), r.random_range(1..5));
    let x: Vec<f64> = (0..shape.len())
        .map(|_| {
            let m = r.random_range(0.01..2.0);
            if r.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    let probe = random_vec(&mut r, shape.len(), -1.0, 1.0);
    let g = leaky_relu_backward(&tensor(shape, x.clone()), &tensor(shape, probe.clone()), 0.1).unwrap();
    let numeric = numeric_gradient(&x, |v| dot(leaky_relu(&tensor(shape, v.to_vec()), 0.1).data(), &probe));
    relative_error(g.data(), &numeric)
}

/// Inputs are a shuffled grid with spacing 1e-2, so no finite-difference
/// step changes a window's argmax.
pub fn maxpool_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = Shape::new(r.random_range(1..3), r.random_range(1..4), 2 * r.random_range(1..4), 2 * r.random_range(1..4));
    let mut x: Vec<f64> = (0..shape.len()).map(|i| i as f64 * 0.01 - 0.3).collect();
    x.shuffle(&mut r);
    let out_shape = Shape::new(shape.n, shape.c, shape.h / 2, shape.w / 2);
    let probe = random_vec(&mut r, out_shape.len(), -1.0, 1.0);
    let g = maxpool2_backward(&tensor(shape, x.clone()), &tensor(out_shape, probe.clone())).unwrap();
    let numeric = numeric_gradient(&x, |v| dot(maxpool2(&tensor(shape, v.to_vec())).unwrap().data(), &probe));
    relative_error(g.data(), &numeric)
}

/// Random box inside the unit square.
pub fn random_box(r: &mut TestRng) -> BBox {
    let w = r.random_range(0.05..0.6);
    let h = r.random_range(0.05..0.6);
    BBox::new(r.random_range(w / 2.0..1.0 - w / 2.0), r.random_range(h / 2.0..1.0 - h / 2.0), w, h)
}

/// Detection loss w.r.t. the raw head output on a small grid, both class
/// counts, random targets.
pub fn loss_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let classes = 1 + (seed % 2) as usize;
    let net = NetworkConfig {
        num_classes: classes,
        num_anchors: 3,
        input_channels: 3,
        input_size: 96,
        anchors: vec![Anchor { w: 0.5, h: 0.7 }, Anchor { w: 1.0, h: 1.0 }, Anchor { w: 2.0, h: 1.5 }],
        profile: Profile::Tiny,
    };
    let batch = r.random_range(1..3);
    let targets: Vec<TargetMap> = (0..batch)
        .map(|_| {
            let boxes: Vec<(usize, BBox)> = (0..r.random_range(0..4))
                .map(|_| (r.random_range(0..classes), random_box(&mut r)))
                .collect();
            assign_targets(&boxes, &net).unwrap()
        })
        .collect();
    let shape = net.output_shape(batch);
    let raw = random_vec(&mut r, shape.len(), -2.0, 2.0);
    let cfg = TrainConfig::default();
    let (_, grad) = detection_loss(&tensor(shape, raw.clone()), &targets, &net, &cfg).unwrap();
    let numeric = numeric_gradient(&raw, |v| detection_loss(&tensor(shape, v.to_vec()), &targets, &net, &cfg).unwrap().0);
    relative_error(grad.data(), &numeric)
}

// ------------------------------------------------------------------ metrics

pub fn brute_iou(a: &BBox, b: &BBox) -> f64 {
    let (ax0, ax1) = (a.cx - a.w / 2.0, a.cx + a.w / 2.0);
    let (ay0, ay1) = (a.cy - a.h / 2.0, a.cy + a.h / 2.0);
    let (bx0, bx1) = (b.cx - b.w / 2.0, b.cx + b.w / 2.0);
    let (by0, by1) = (b.cy - b.h / 2.0, b.cy + b.h / 2.0);
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Greedy matching by repeated selection of the most confident remaining
/// detection (lowest input index on ties). Returns `(input index, tp)` in
/// processing order.
pub fn brute_match(
    dets: &[DetectionRecord],
    truth: &[ImageTruth],
    class_id: usize,
    threshold: f64,
) -> Vec<(usize, bool)> {
    let mut remaining: Vec<usize> = (0..dets.len()).filter(|&i| dets[i].detection.class_id == class_id).collect();
    let mut used: Vec<Vec<bool>> = truth.iter().map(|t| vec![false; t.objects.len()]).collect();
    let mut out = Vec::new();
    while !remaining.is_empty() {
        let mut pick = 0;
        for k in 1..remaining.len() {
            let (a, b) = (&dets[remaining[k]], &dets[remaining[pick]]);
            if a.detection.confidence > b.detection.confidence
                || (a.detection.confidence == b.detection.confidence && remaining[k] < remaining[pick])
            {
                pick = k;
            }
        }
        let i = remaining.remove(pick);
        let img = truth.iter().position(|t| t.image_id == dets[i].image_id).unwrap();
        let mut best: Option<(usize, f64)> = None;
        for (k, o) in truth[img].objects.iter().enumerate() {
            if o.class_id == class_id && !used[img][k] {
                let v = brute_iou(&dets[i].detection.bbox, &o.bbox);
                if best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((k, v));
                }
            }
        }
        let tp = matches!(best, Some((_, v)) if v > threshold);
        if tp {
            used[img][best.unwrap().0] = true;
        }
        out.push((i, tp));
    }
    out
}

/// All-point AP straight from the definition: for each recall step, the
/// highest precision at any recall at least as large.
pub fn brute_ap(flags: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut points = Vec::new();
    let mut tp = 0;
    for (k, &f) in flags.iter().enumerate() {
        tp += f as usize;
        points.push((tp as f64 / (k + 1) as f64, tp as f64 / num_gt as f64));
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for &(_, r) in &points {
        if r > prev {
            let best = points.iter().filter(|p| p.1 >= r).map(|p| p.0).fold(0.0, f64::max);
            ap += (r - prev) * best;
            prev = r;
        }
    }
    ap
}

pub fn brute_f_score(dets: &[DetectionRecord], order: &[(usize, bool)], num_gt: usize, threshold: f64) -> f64 {
    let kept: Vec<bool> = order
        .iter()
        .filter(|(i, _)| dets[*i].detection.confidence >= threshold)
        .map(|(_, tp)| *tp)
        .collect();
    let tp = kept.iter().filter(|&&t| t).count() as f64;
    let p = if kept.is_empty() { 0.0 } else { tp / kept.len() as f64 };
    let rc = if num_gt == 0 { 0.0 } else { tp / num_gt as f64 };
    if p + rc == 0.0 {
        0.0
    } else {
        2.0 * p * rc / (p + rc)
    }
}

/// Up to `max_boxes` boxes in total (ground truth plus detections) over one
/// to three images; detections mostly jitter ground truth, confidences are
/// quantized so ties occur.
pub fn random_instance(r: &mut TestRng, max_boxes: usize) -> (Vec<DetectionRecord>, Vec<ImageTruth>) {
    let images = r.random_range(1..4);
    let total = r.random_range(1..=max_boxes);
    let n_gt = r.random_range(0..=total);
    let mut truth: Vec<ImageTruth> = (0..images)
        .map(|i| ImageTruth {
            image_id: format!("img{i}"),
            objects: Vec::new(),
        })
        .collect();
    for _ in 0..n_gt {
        let img = r.random_range(0..images);
        truth[img].objects.push(Annotation {
            class_id: r.random_range(0..2),
            bbox: random_box(r),
        });
    }
    let all_gt: Vec<(usize, Annotation)> = truth
        .iter()
        .enumerate()
        .flat_map(|(i, t)| t.objects.iter().map(move |o| (i, *o)))
        .collect();
    let dets = (n_gt..total)
        .map(|_| {
            let (img, class_id, bbox) = if !all_gt.is_empty() && r.random_bool(0.7) {
                let (img, o) = all_gt[r.random_range(0..all_gt.len())];
                let j = |r: &mut TestRng, v: f64, s: f64| v + r.random_range(-s..s);
                let b = BBox::new(
                    j(r, o.bbox.cx, 0.1 * o.bbox.w),
                    j(r, o.bbox.cy, 0.1 * o.bbox.h),
                    o.bbox.w * r.random_range(0.7..1.3),
                    o.bbox.h * r.random_range(0.7..1.3),
                );
                (img, o.class_id, b)
            } else {
                (r.random_range(0..images), r.random_range(0..2), random_box(r))
            };
            DetectionRecord::new(
                format!("img{img}"),
                Detection {
                    bbox,
                    class_id,
                    confidence: (r.random_range(0..=20) as f64) / 20.0,
                },
            )
        })
        .collect();
    (dets, truth)
}

// ---------------------------------------------------------------- wilcoxon

/// Two-sided exact p by enumerating all 2ⁿ sign assignments of the ranks:
/// the fraction with `min(W⁺, W⁻)` at most the observed one.
pub fn brute_wilcoxon_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    let n = d.len();
    let rank = |i: usize| {
        let less = d.iter().filter(|v| v.abs() < d[i].abs()).count() as f64;
        let equal = d.iter().filter(|v| v.abs() == d[i].abs()).count() as f64;
        less + (equal + 1.0) / 2.0
    };
    let ranks: Vec<f64> = (0..n).map(rank).collect();
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let observed = w_plus.min(total - w_plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let wp: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if wp.min(total - wp) <= observed + 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

// ------------------------------------------------------------ architecture

/// One row of the reference layer table: `(kind, group, filters, kernel,
/// stride, input (h, w, c), output (h, w, c))`. Row 23's channel counts
/// are filled in per class count; row 24 has no shapes.
pub type TableRow = (&'static str, &'static str, usize, usize, usize, (usize, usize, usize), (usize, usize, usize));

pub fn reference_table(head_filters: usize) -> Vec<TableRow> {
    vec![
        ("conv", "External", 32, 3, 1, (416, 416, 3), (416, 416, 32)),
        ("max", "", 0, 2, 2, (416, 416, 32), (208, 208, 32)),
        ("conv", "External", 64, 3, 1, (208, 208, 32), (208, 208, 64)),
        ("max", "", 0, 2, 2, (208, 208, 64), (104, 104, 64)),
        ("conv", "External", 128, 3, 1, (104, 104, 64), (104, 104, 128)),
        ("conv", "Internal", 64, 1, 1, (104, 104, 128), (104, 104, 64)),
        ("conv", "External", 128, 3, 1, (104, 104, 64), (104, 104, 128)),
        ("max", "", 0, 2, 2, (104, 104, 128), (52, 52, 128)),
        ("conv", "External", 256, 3, 1, (52, 52, 128), (52, 52, 256)),
        ("conv", "Internal", 128, 1, 1, (52, 52, 256), (52, 52, 128)),
        ("conv", "External", 256, 3, 1, (52, 52, 128), (52, 52, 256)),
        ("max", "", 0, 2, 2, (52, 52, 256), (26, 26, 256)),
        ("conv", "External", 512, 3, 1, (26, 26, 256), (26, 26, 512)),
        ("conv", "Internal", 256, 1, 1, (26, 26, 512), (26, 26, 256)),
        ("conv", "External", 512, 3, 1, (26, 26, 256), (26, 26, 512)),
        ("conv", "Internal", 256, 1, 1, (26, 26, 512), (26, 26, 256)),
        // printed as 26×26×512 in the source table; layer 15 emits 256 channels
        ("conv", "External", 512, 3, 1, (26, 26, 256), (26, 26, 512)),
        ("max", "", 0, 2, 2, (26, 26, 512), (13, 13, 512)),
        ("conv", "External", 1024, 3, 1, (13, 13, 512), (13, 13, 1024)),
        ("conv", "Internal", 512, 1, 1, (13, 13, 1024), (13, 13, 512)),
        ("conv", "External", 1024, 3, 1, (13, 13, 512), (13, 13, 1024)),
        ("conv", "Internal", 512, 1, 1, (13, 13, 1024), (13, 13, 512)),
        ("conv", "External", 1024, 3, 1, (13, 13, 512), (13, 13, 1024)),
        ("conv", "", head_filters, 1, 1, (13, 13, 1024), (13, 13, head_filters)),
        ("detection", "", 0, 0, 0, (13, 13, head_filters), (13, 13, head_filters)),
    ]
}

/// Channel count of the prediction head with five anchors.
pub fn expected_head(classes: usize) -> usize {
    (classes + 5) * 5
}

// --------------------------------------------------------------- experiment

pub const EXPERIMENT_IMAGES: usize = 300;
pub const EXPERIMENT_SEED: u64 = 7;
pub const EXPERIMENT_IMAGE_SIZE: usize = 160;

pub fn experiment_config() -> ocular::config::RunConfig {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/experiment.cfg");
    ocular::config::RunConfig::read(path).unwrap()
}

/// Everything written by one run of the desk-scale experiment.
pub struct ExperimentOutcome {
    /// Two-class model, iris model, periocular model.
    pub weights: Vec<Vec<u8>>,
    pub detections: Vec<Vec<u8>>,
    pub report_text: String,
    pub report: ocular::experiment::CompareReport,
    /// Test mean IoU per (model, class) for the three models.
    pub multi_iou: (f64, f64),
    pub iris_iou: f64,
    pub peri_iou: f64,
}

/// Generates the dataset under `dir`, trains the two-class model and both
/// one-class models, writes their test detections and the comparison report.
pub fn run_experiment(dir: &std::path::Path) -> ocular::Result<ExperimentOutcome> {
    use ocular::config::ClassSelection;
    use ocular::data::Split;
    use ocular::experiment::{compare, detect_split, load_truth, train_detector};
    use ocular::metrics::{evaluate, EvalOptions};

    let manifest = ocular::data::synth_generate(EXPERIMENT_IMAGES, EXPERIMENT_SEED, EXPERIMENT_IMAGE_SIZE, dir.join("data"))?;
    let config = experiment_config();
    let truth = load_truth(&manifest, Split::Test)?;
    let opts = EvalOptions::default();
    let mut weights = Vec::new();
    let mut detections = Vec::new();
    let mut dets = Vec::new();
    for (name, classes) in [("multi", ClassSelection::Both), ("iris", ClassSelection::Iris), ("peri", ClassSelection::Periocular)] {
        let detector = train_detector(&manifest, classes, &config, |_, _| {})?;
        let w = dir.join(format!("{name}.weights"));
        detector.save(&w)?;
        weights.push(std::fs::read(&w).unwrap());
        let d = detect_split(&detector, &manifest, Split::Test)?;
        let p = dir.join(format!("{name}.txt"));
        ocular::detfile::write_detections(&p, &d)?;
        detections.push(std::fs::read(&p).unwrap());
        dets.push(ocular::detfile::read_detections(&p)?);
    }
    let iou = |d: &[DetectionRecord], class: usize| -> ocular::Result<f64> {
        Ok(evaluate(d, &truth, &[class], &opts)?.classes[0].mean_iou)
    };
    let multi = evaluate(&dets[0], &truth, &[0, 1], &opts)?;
    let multi_iou = (multi.classes[0].mean_iou, multi.classes[1].mean_iou);
    let iris_iou = iou(&dets[1], 0)?;
    let peri_iou = iou(&dets[2], 1)?;
    let report = compare(&dets[0], dets[1].clone(), dets[2].clone(), &truth, &opts)?;
    let report_text = report.to_text();
    std::fs::write(dir.join("report.txt"), &report_text).unwrap();
    Ok(ExperimentOutcome {
        weights,
        detections,
        report_text,
        report,
        multi_iou,
        iris_iou,
        peri_iou,
    })
}
