//! Detection evaluation: greedy matching at IoU > 0.5, precision/recall,
//! F-score, average precision, mAP and per-image best-detection IoU.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::data::Annotation;
use crate::detfile::DetectionRecord;
use crate::error::{Error, Result};
use crate::head::{class_name, BBox, DEFAULT_CONF_THRESHOLD};

pub const DEFAULT_MATCH_IOU: f64 = 0.5;

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

/// Ground truth of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTruth {
    pub image_id: String,
    pub objects: Vec<Annotation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    AllPoint,
    ElevenPoint,
}

impl Interpolation {
    pub fn name(self) -> &'static str {
        match self {
            Interpolation::AllPoint => "all-point",
            Interpolation::ElevenPoint => "11-point",
        }
    }
}

/// One processed detection, in processing order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedDetection {
    /// Index into the detection list given to [`match_detections`].
    pub index: usize,
    pub confidence: f64,
    pub true_positive: bool,
    /// `(image index, object index)` of the matched ground truth.
    pub gt: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMatch {
    pub class_id: usize,
    pub num_gt: usize,
    /// Descending confidence; ties keep input order.
    pub detections: Vec<MatchedDetection>,
}

impl ClassMatch {
    /// `(tp, fp)` over detections with confidence ≥ `threshold`.
    pub fn counts_at(&self, threshold: f64) -> (usize, usize) {
        let kept = self.detections.iter().filter(|d| d.confidence >= threshold);
        kept.fold((0, 0), |(tp, fp), d| if d.true_positive { (tp + 1, fp) } else { (tp, fp + 1) })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub classes: Vec<ClassMatch>,
}

impl MatchResult {
    pub fn class(&self, class_id: usize) -> Option<&ClassMatch> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }
}

fn image_index(truth: &[ImageTruth]) -> HashMap<&str, usize> {
    truth.iter().enumerate().map(|(i, t)| (t.image_id.as_str(), i)).collect()
}

fn check_images(detections: &[DetectionRecord], index: &HashMap<&str, usize>) -> Result<()> {
    let unknown: BTreeSet<&str> = detections
        .iter()
        .map(|d| d.image_id.as_str())
        .filter(|id| !index.contains_key(id))
        .collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(Error::UnknownImages(unknown.into_iter().map(String::from).collect()))
    }
}

/// Per class, detections are taken in descending confidence; each is a true
/// positive when the unmatched ground-truth box of its class and image with
/// the highest IoU exceeds `iou_threshold`.
pub fn match_detections(
    detections: &[DetectionRecord],
    truth: &[ImageTruth],
    classes: &[usize],
    iou_threshold: f64,
) -> Result<MatchResult> {
    if let Some(d) = detections.iter().find(|d| !classes.contains(&d.detection.class_id)) {
        return Err(Error::UnknownClass(d.detection.class_id));
    }
    let index = image_index(truth);
    check_images(detections, &index)?;

    let mut out = Vec::with_capacity(classes.len());
    for &class_id in classes {
        let mut order: Vec<usize> = (0..detections.len())
            .filter(|&i| detections[i].detection.class_id == class_id)
            .collect();
        // stable: equal confidences keep input order
        order.sort_by(|&a, &b| {
            detections[b]
                .detection
                .confidence
                .total_cmp(&detections[a].detection.confidence)
        });
        let mut used: Vec<Vec<bool>> = truth.iter().map(|t| vec![false; t.objects.len()]).collect();
        let num_gt = truth
            .iter()
            .map(|t| t.objects.iter().filter(|o| o.class_id == class_id).count())
            .sum();
        let mut matched = Vec::with_capacity(order.len());
        for i in order {
            let rec = &detections[i];
            let img = index[rec.image_id.as_str()];
            let mut best: Option<(usize, f64)> = None;
            for (k, obj) in truth[img].objects.iter().enumerate() {
                if obj.class_id != class_id || used[img][k] {
                    continue;
                }
                let v = iou(&rec.detection.bbox, &obj.bbox);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
            let gt = best.filter(|&(_, v)| v > iou_threshold).map(|(k, _)| (img, k));
            if let Some((img, k)) = gt {
                used[img][k] = true;
            }
            matched.push(MatchedDetection {
                index: i,
                confidence: rec.detection.confidence,
                true_positive: gt.is_some(),
                gt,
            });
        }
        out.push(ClassMatch {
            class_id,
            num_gt,
            detections: matched,
        });
    }
    Ok(MatchResult { classes: out })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
}

/// Cumulative precision/recall after each detection, and the average
/// precision. With no ground truth the curve is empty and AP is 0.
pub fn pr_and_ap(class_match: &ClassMatch, interpolation: Interpolation) -> (Vec<PrPoint>, f64) {
    let num_gt = class_match.num_gt;
    if num_gt == 0 {
        return (Vec::new(), 0.0);
    }
    let mut tp = 0usize;
    let curve: Vec<PrPoint> = class_match
        .detections
        .iter()
        .enumerate()
        .map(|(k, d)| {
            tp += d.true_positive as usize;
            PrPoint {
                precision: tp as f64 / (k + 1) as f64,
                recall: tp as f64 / num_gt as f64,
            }
        })
        .collect();
    let ap = match interpolation {
        Interpolation::AllPoint => {
            let flags: Vec<bool> = class_match.detections.iter().map(|d| d.true_positive).collect();
            all_point_ap_exact(&flags, num_gt).unwrap_or_else(|| all_point_ap(&curve))
        }
        Interpolation::ElevenPoint => eleven_point_ap(&curve),
    };
    (curve, ap)
}

fn all_point_ap(curve: &[PrPoint]) -> f64 {
    // precision envelope, swept from the right
    let mut envelope: Vec<f64> = curve.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in curve.iter().zip(&envelope) {
        if p.recall > prev_recall {
            ap += (p.recall - prev_recall) * env;
            prev_recall = p.recall;
        }
    }
    ap
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Exact all-point AP as a reduced fraction, `None` on overflow. Every
/// precision is `tp / k` and every recall step `Δtp / num_gt`, so the area
/// is rational.
fn all_point_ap_exact(flags: &[bool], num_gt: usize) -> Option<f64> {
    let mut tp = 0u128;
    let prec: Vec<(u128, u128)> = flags
        .iter()
        .enumerate()
        .map(|(k, &hit)| {
            tp += hit as u128;
            (tp, k as u128 + 1)
        })
        .collect();
    let mut env = prec.clone();
    for i in (0..env.len().saturating_sub(1)).rev() {
        let (a, b) = (env[i], env[i + 1]);
        if b.0 * a.1 > a.0 * b.1 {
            env[i] = b;
        }
    }
    let (mut num, mut den) = (0u128, 1u128);
    for (i, &hit) in flags.iter().enumerate() {
        if !hit {
            continue;
        }
        let (p, q) = env[i];
        let g = gcd(den, q);
        let lcm = den.checked_mul(q / g)?;
        num = num.checked_mul(lcm / den)?.checked_add(p.checked_mul(lcm / q)?)?;
        den = lcm;
        let g = gcd(num, den).max(1);
        (num, den) = (num / g, den / g);
    }
    let den = den.checked_mul(num_gt as u128)?;
    let g = gcd(num, den).max(1);
    let (num, den) = (num / g, den / g);
    // both exactly representable, so the quotient is correctly rounded
    (num < 1 << 53 && den < 1 << 53).then(|| num as f64 / den as f64)
}

fn eleven_point_ap(curve: &[PrPoint]) -> f64 {
    (0..=10)
        .map(|t| {
            let r = t as f64 / 10.0;
            curve
                .iter()
                .filter(|p| p.recall >= r)
                .map(|p| p.precision)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfCounts {
    pub tp: usize,
    pub fp: usize,
    pub num_gt: usize,
}

impl PrfCounts {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.num_gt == 0 {
            0.0
        } else {
            self.tp as f64 / self.num_gt as f64
        }
    }

    pub fn f_score(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Dataset-level counts over detections with confidence ≥ `conf_threshold`.
pub fn prf_counts(class_match: &ClassMatch, conf_threshold: f64) -> PrfCounts {
    let (tp, fp) = class_match.counts_at(conf_threshold);
    PrfCounts {
        tp,
        fp,
        num_gt: class_match.num_gt,
    }
}

pub fn f_score(class_match: &ClassMatch, conf_threshold: f64) -> f64 {
    prf_counts(class_match, conf_threshold).f_score()
}

pub fn mean_iou(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::invalid("mean IoU of an empty series"));
    }
    Ok(series.iter().sum::<f64>() / series.len() as f64)
}

/// For every image holding at least one `class_id` object: the IoU between
/// the highest-confidence detection of that class (first in input order on
/// ties) and the best-overlapping ground-truth box; 0 without detections.
pub fn per_image_best_iou(
    detections: &[DetectionRecord],
    truth: &[ImageTruth],
    class_id: usize,
) -> Result<Vec<(String, f64)>> {
    let index = image_index(truth);
    check_images(detections, &index)?;
    let mut top: Vec<Option<&DetectionRecord>> = vec![None; truth.len()];
    for rec in detections.iter().filter(|r| r.detection.class_id == class_id) {
        let slot = &mut top[index[rec.image_id.as_str()]];
        if slot.is_none_or(|t| rec.detection.confidence > t.detection.confidence) {
            *slot = Some(rec);
        }
    }
    Ok(truth
        .iter()
        .zip(top)
        .filter(|(t, _)| t.objects.iter().any(|o| o.class_id == class_id))
        .map(|(t, det)| {
            let v = det.map_or(0.0, |d| {
                t.objects
                    .iter()
                    .filter(|o| o.class_id == class_id)
                    .map(|o| iou(&d.detection.bbox, &o.bbox))
                    .fold(0.0, f64::max)
            });
            (t.image_id.clone(), v)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub iou_threshold: f64,
    /// Confidence cut for precision, recall and F-score; AP uses every detection.
    pub conf_threshold: f64,
    pub interpolation: Interpolation,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            iou_threshold: DEFAULT_MATCH_IOU,
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            interpolation: Interpolation::AllPoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class_id: usize,
    pub num_gt: usize,
    pub num_detections: usize,
    pub counts: PrfCounts,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub average_precision: f64,
    pub mean_iou: f64,
    /// AP was defined as 0 because the class has no ground truth.
    pub no_ground_truth: bool,
    /// Per-image best-detection IoU, in ground-truth order.
    pub per_image_iou: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub options: EvalOptions,
    pub num_images: usize,
    pub num_detections: usize,
    pub classes: Vec<ClassReport>,
    pub map: f64,
}

pub fn evaluate(
    detections: &[DetectionRecord],
    truth: &[ImageTruth],
    classes: &[usize],
    options: &EvalOptions,
) -> Result<EvalReport> {
    if truth.is_empty() {
        return Err(Error::invalid("evaluation needs at least one ground-truth image"));
    }
    if classes.is_empty() {
        return Err(Error::invalid("evaluation needs at least one class"));
    }
    let matches = match_detections(detections, truth, classes, options.iou_threshold)?;
    let mut reports = Vec::with_capacity(classes.len());
    for m in &matches.classes {
        let (_, ap) = pr_and_ap(m, options.interpolation);
        let counts = prf_counts(m, options.conf_threshold);
        let per_image_iou = per_image_best_iou(detections, truth, m.class_id)?;
        let series: Vec<f64> = per_image_iou.iter().map(|(_, v)| *v).collect();
        reports.push(ClassReport {
            class_id: m.class_id,
            num_gt: m.num_gt,
            num_detections: m.detections.len(),
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f_score: counts.f_score(),
            average_precision: ap,
            mean_iou: if series.is_empty() { 0.0 } else { mean_iou(&series)? },
            no_ground_truth: m.num_gt == 0,
            per_image_iou,
        });
    }
    let map = reports.iter().map(|r| r.average_precision).sum::<f64>() / reports.len() as f64;
    Ok(EvalReport {
        options: *options,
        num_images: truth.len(),
        num_detections: detections.len(),
        classes: reports,
        map,
    })
}

/// Concatenates two single-class detection lists into one; their class sets
/// must be disjoint.
pub fn merge_single_class(
    first: Vec<DetectionRecord>,
    second: Vec<DetectionRecord>,
) -> Result<Vec<DetectionRecord>> {
    let a: BTreeSet<usize> = first.iter().map(|d| d.detection.class_id).collect();
    if let Some(shared) = second.iter().map(|d| d.detection.class_id).find(|c| a.contains(c)) {
        return Err(Error::format(
            "merging detection files",
            format!("both files contain class {shared}; expected one class per file"),
        ));
    }
    let mut out = first;
    out.extend(second);
    Ok(out)
}

impl EvalReport {
    pub fn class(&self, class_id: usize) -> Option<&ClassReport> {
        self.classes.iter().find(|c| c.class_id == class_id)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let o = &self.options;
        let _ = writeln!(s, "images = {}", self.num_images);
        let _ = writeln!(s, "detections = {}", self.num_detections);
        let _ = writeln!(s, "iou_threshold = {}", o.iou_threshold);
        let _ = writeln!(s, "conf_threshold = {}", o.conf_threshold);
        let _ = writeln!(s, "interpolation = {}", o.interpolation.name());
        let _ = writeln!(s, "mAP = {:.6}", self.map);
        s.push('\n');
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "class", "gt", "dets", "tp", "fp", "precision", "recall", "f_score", "ap", "mean_iou"
        );
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{:<12} {:>6} {:>6} {:>6} {:>6} {:>9.6} {:>9.6} {:>9.6} {:>9.6} {:>9.6}{}",
                class_name(c.class_id),
                c.num_gt,
                c.num_detections,
                c.counts.tp,
                c.counts.fp,
                c.precision,
                c.recall,
                c.f_score,
                c.average_precision,
                c.mean_iou,
                if c.no_ground_truth { "  (no ground truth: AP set to 0)" } else { "" }
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("class_id,class,num_gt,detections,tp,fp,precision,recall,f_score,ap,mean_iou\n");
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{:.9},{:.9},{:.9},{:.9},{:.9}",
                c.class_id,
                class_name(c.class_id),
                c.num_gt,
                c.num_detections,
                c.counts.tp,
                c.counts.fp,
                c.precision,
                c.recall,
                c.f_score,
                c.average_precision,
                c.mean_iou
            );
        }
        let _ = writeln!(s, ",mAP,,,,,,,,{:.9},", self.map);
        s
    }

    /// `image_id,class_id,iou` rows of the per-image series.
    pub fn per_image_csv(&self) -> String {
        let mut s = String::from("image_id,class_id,iou\n");
        for c in &self.classes {
            for (id, v) in &c.per_image_iou {
                let _ = writeln!(s, "{id},{},{v:.9}", c.class_id);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::Detection;

    fn det(image: &str, class_id: usize, confidence: f64, bbox: BBox) -> DetectionRecord {
        DetectionRecord::new(
            image,
            Detection {
                bbox,
                class_id,
                confidence,
            },
        )
    }

    fn truth(image: &str, objects: &[(usize, BBox)]) -> ImageTruth {
        ImageTruth {
            image_id: image.into(),
            objects: objects.iter().map(|&(class_id, bbox)| Annotation { class_id, bbox }).collect(),
        }
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(1.0, 1.0, 2.0, 2.0);
        let b = BBox::new(2.0, 2.0, 2.0, 2.0);
        assert!((iou(&a, &b) - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BBox::new(9.0, 9.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn second_detection_on_matched_gt_is_false_positive() {
        let g = BBox::new(0.5, 0.5, 0.4, 0.4);
        let near = BBox::new(0.51, 0.5, 0.4, 0.4);
        let t = [truth("a", &[(0, g)])];
        let m = match_detections(&[det("a", 0, 0.8, near), det("a", 0, 0.9, near)], &t, &[0], 0.5).unwrap();
        let flags: Vec<(usize, bool)> = m.classes[0].detections.iter().map(|d| (d.index, d.true_positive)).collect();
        assert_eq!(flags, [(1, true), (0, false)]);
    }

    #[test]
    fn iou_of_exactly_half_is_not_a_match() {
        let g = BBox::from_corners(0.0, 0.0, 1.0, 1.0);
        let half = BBox::from_corners(0.0, 0.0, 0.5, 1.0);
        let t = [truth("a", &[(0, g)])];
        assert_eq!(iou(&g, &half), 0.5);
        let m = match_detections(&[det("a", 0, 0.9, half)], &t, &[0], 0.5).unwrap();
        assert!(!m.classes[0].detections[0].true_positive);
    }

    #[test]
    fn hand_computed_ap_is_five_sixths() {
        let class = ClassMatch {
            class_id: 0,
            num_gt: 2,
            detections: [(0.9, true), (0.8, false), (0.7, true)]
                .iter()
                .enumerate()
                .map(|(index, &(confidence, true_positive))| MatchedDetection {
                    index,
                    confidence,
                    true_positive,
                    gt: None,
                })
                .collect(),
        };
        let (curve, ap) = pr_and_ap(&class, Interpolation::AllPoint);
        let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.precision, p.recall)).collect();
        assert_eq!(pts, [(1.0, 0.5), (0.5, 0.5), (2.0 / 3.0, 1.0)]);
        assert_eq!(ap, 5.0 / 6.0);
    }

    #[test]
    fn exact_and_float_ap_agree() {
        let flags = [true, false, false, true, true, false, true, false, false, false, true];
        let class = ClassMatch {
            class_id: 0,
            num_gt: 7,
            detections: flags
                .iter()
                .enumerate()
                .map(|(index, &true_positive)| MatchedDetection {
                    index,
                    confidence: 1.0 - index as f64 / 20.0,
                    true_positive,
                    gt: None,
                })
                .collect(),
        };
        let (curve, ap) = pr_and_ap(&class, Interpolation::AllPoint);
        assert!((ap - all_point_ap(&curve)).abs() < 1e-15);
    }

    #[test]
    fn ap_edge_cases() {
        let empty = ClassMatch {
            class_id: 0,
            num_gt: 3,
            detections: vec![],
        };
        assert_eq!(pr_and_ap(&empty, Interpolation::AllPoint).1, 0.0);
        let perfect = ClassMatch {
            class_id: 0,
            num_gt: 2,
            detections: (0..2)
                .map(|index| MatchedDetection {
                    index,
                    confidence: 0.9,
                    true_positive: true,
                    gt: None,
                })
                .collect(),
        };
        assert_eq!(pr_and_ap(&perfect, Interpolation::AllPoint).1, 1.0);
        assert!((pr_and_ap(&perfect, Interpolation::ElevenPoint).1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn f_score_examples() {
        let f = |tp, fp, num_gt| PrfCounts { tp, fp, num_gt }.f_score();
        assert_eq!(f(2, 0, 2), 1.0);
        assert!((f(2, 2, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f(0, 3, 2), 0.0);
    }

    #[test]
    fn mean_iou_counts_missing_as_zero() {
        let g = BBox::new(0.5, 0.5, 0.2, 0.2);
        let t = [truth("a", &[(0, g)]), truth("b", &[(0, g)])];
        let partial = BBox::from_corners(0.4, 0.4, 0.6, 0.56);
        let series = per_image_best_iou(&[det("a", 0, 0.5, partial)], &t, 0).unwrap();
        assert!((series[0].1 - 0.8).abs() < 1e-12);
        assert_eq!(series[1], ("b".to_string(), 0.0));
        let vals: Vec<f64> = series.iter().map(|s| s.1).collect();
        assert!((mean_iou(&vals).unwrap() - 0.4).abs() < 1e-12);
        assert!(mean_iou(&[]).is_err());
    }

    #[test]
    fn unknown_images_and_classes_rejected() {
        let t = [truth("a", &[])];
        let b = BBox::new(0.5, 0.5, 0.1, 0.1);
        let e = match_detections(&[det("zz", 0, 0.5, b), det("yy", 0, 0.5, b)], &t, &[0], 0.5).unwrap_err();
        assert_eq!(e.to_string(), "detections reference unknown image ids: yy, zz");
        assert!(matches!(
            match_detections(&[det("a", 2, 0.5, b)], &t, &[0, 1], 0.5),
            Err(Error::UnknownClass(2))
        ));
    }

    #[test]
    fn perfect_and_empty_evaluations() {
        let t = [
            truth("a", &[(0, BBox::new(0.5, 0.5, 0.2, 0.2)), (1, BBox::new(0.5, 0.5, 0.6, 0.4))]),
            truth("b", &[(0, BBox::new(0.3, 0.4, 0.1, 0.1)), (1, BBox::new(0.3, 0.4, 0.5, 0.3))]),
        ];
        let dets: Vec<DetectionRecord> = t
            .iter()
            .flat_map(|img| img.objects.iter().map(|o| det(&img.image_id, o.class_id, 0.9, o.bbox)))
            .collect();
        let r = evaluate(&dets, &t, &[0, 1], &EvalOptions::default()).unwrap();
        assert_eq!(r.map, 1.0);
        for c in &r.classes {
            assert_eq!((c.mean_iou, c.f_score, c.average_precision), (1.0, 1.0, 1.0));
        }
        let r = evaluate(&[], &t, &[0, 1], &EvalOptions::default()).unwrap();
        assert_eq!(r.map, 0.0);
        assert!(r.classes.iter().all(|c| c.mean_iou == 0.0 && c.f_score == 0.0));
        assert!(r.to_text().contains("mAP = 0.000000"));
    }

    #[test]
    fn merge_requires_disjoint_classes() {
        let b = BBox::new(0.5, 0.5, 0.1, 0.1);
        assert_eq!(merge_single_class(vec![det("a", 0, 0.5, b)], vec![det("a", 1, 0.5, b)]).unwrap().len(), 2);
        assert!(merge_single_class(vec![det("a", 0, 0.5, b)], vec![det("a", 0, 0.5, b)]).is_err());
    }
}
