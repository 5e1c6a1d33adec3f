//! Anchor decoding of the prediction grid and greedy non-maximum suppression.
//!
//! The head output has `A · (5 + C)` channels per cell, grouped by anchor:
//! `tx, ty, tw, th, to`, then `C` class logits. For cell (row `i`, column `j`)
//! on an `S × S` grid and prior `(pw, ph)`:
//!
//! ```text
//! cx = (j + σ(tx)) / S        w = pw · exp(tw) / S
//! cy = (i + σ(ty)) / S        h = ph · exp(th) / S
//! score_c = σ(to) · softmax(logits)_c
//! ```

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::network::{Anchor, NetworkConfig};
use crate::scalar::Scalar;
use crate::tensor::TensorT;

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.25;
pub const DEFAULT_NMS_THRESHOLD: f64 = 0.45;

pub const IRIS: usize = 0;
pub const PERIOCULAR: usize = 1;

pub fn class_name(class_id: usize) -> &'static str {
    match class_id {
        IRIS => "iris",
        PERIOCULAR => "periocular",
        _ => "unknown",
    }
}

/// Axis-aligned box in normalized center/size form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox { cx, cy, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox {
            cx: (x0 + x1) / 2.0,
            cy: (y0 + y1) / 2.0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    /// `(x0, y0, x1, y1)`
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )
    }

    /// Area from the corner coordinates, consistent with [`BBox::intersection`].
    pub fn area(&self) -> f64 {
        let (x0, y0, x1, y1) = self.corners();
        (x1 - x0).max(0.0) * (y1 - y0).max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0
            && self.h > 0.0
            && (0.0..=1.0).contains(&self.cx)
            && (0.0..=1.0).contains(&self.cy)
            && self.w.is_finite()
            && self.h.is_finite()
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let (ax0, ay0, ax1, ay1) = self.corners();
        let (bx0, by0, bx1, by1) = other.corners();
        let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
        let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
        iw * ih
    }

    /// Intersection over union; 0 for disjoint boxes.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other);
        if inter <= 0.0 {
            return 0.0;
        }
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    /// Whether `other` lies inside this box (edges may touch).
    pub fn contains(&self, other: &BBox) -> bool {
        let (ax0, ay0, ax1, ay1) = self.corners();
        let (bx0, by0, bx1, by1) = other.corners();
        ax0 <= bx0 && ay0 <= by0 && ax1 >= bx1 && ay1 >= by1
    }

    /// Clipped to the unit square; `None` when nothing remains.
    pub fn clipped(&self) -> Option<BBox> {
        let (x0, y0, x1, y1) = self.corners();
        let (x0, y0) = (x0.clamp(0.0, 1.0), y0.clamp(0.0, 1.0));
        let (x1, y1) = (x1.clamp(0.0, 1.0), y1.clamp(0.0, 1.0));
        (x1 > x0 && y1 > y0).then(|| BBox::from_corners(x0, y0, x1, y1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: usize,
    pub confidence: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Channel offset of `(anchor, field)` within one cell's prediction vector.
pub(crate) fn channel(anchor: usize, field: usize, num_classes: usize) -> usize {
    anchor * (5 + num_classes) + field
}

/// Raw `(tx, ty, tw, th)` that decode to `bbox` from cell `(row, col)` and `anchor`.
///
/// The box centre must fall strictly inside the cell.
pub fn encode(bbox: &BBox, row: usize, col: usize, anchor: Anchor, grid: usize) -> [f64; 4] {
    let s = grid as f64;
    [
        logit(bbox.cx * s - col as f64),
        logit(bbox.cy * s - row as f64),
        (bbox.w * s / anchor.w).ln(),
        (bbox.h * s / anchor.h).ln(),
    ]
}

fn decode_box(raw: [f64; 4], row: usize, col: usize, anchor: Anchor, grid: usize) -> BBox {
    let s = grid as f64;
    BBox {
        cx: (col as f64 + sigmoid(raw[0])) / s,
        cy: (row as f64 + sigmoid(raw[1])) / s,
        w: anchor.w * raw[2].exp() / s,
        h: anchor.h * raw[3].exp() / s,
    }
}

/// Decodes batch item `item` of the head output into per-class detections
/// whose score is at least `conf_threshold`. Class ids are model-local.
pub fn decode_item<S: Scalar>(
    feature_map: &TensorT<S>,
    item: usize,
    config: &NetworkConfig,
    conf_threshold: f64,
) -> Result<Vec<Detection>> {
    let shape = feature_map.shape();
    let a = config.num_anchors;
    let c = config.num_classes;
    if a == 0 || shape.c % a != 0 || shape.c != (c + 5) * a || shape.h != shape.w || item >= shape.n {
        return Err(Error::ShapeMismatch {
            op: "decode",
            expected: format!("(>{item}, {}, S, S)", (c + 5) * a),
            actual: shape.to_string(),
        });
    }
    let grid = shape.h;
    let plane = shape.plane();
    let data = feature_map.item(item);
    let at = |ch: usize, cell: usize| data[ch * plane + cell].to_f64_lossy();

    let mut out = Vec::new();
    let mut logits = vec![0.0; c];
    for row in 0..grid {
        for col in 0..grid {
            let cell = row * grid + col;
            for (k, &anchor) in config.anchors.iter().enumerate() {
                let raw = [0, 1, 2, 3].map(|f| at(channel(k, f, c), cell));
                let objectness = sigmoid(at(channel(k, 4, c), cell));
                let probs = if c == 1 {
                    vec![1.0]
                } else {
                    for (cls, l) in logits.iter_mut().enumerate() {
                        *l = at(channel(k, 5 + cls, c), cell);
                    }
                    softmax(&logits)
                };
                let bbox = decode_box(raw, row, col, anchor, grid);
                for (cls, p) in probs.into_iter().enumerate() {
                    let confidence = objectness * p;
                    if confidence >= conf_threshold {
                        out.push(Detection {
                            bbox,
                            class_id: cls,
                            confidence,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// [`decode_item`] for a single-image feature map of shape `(1, (C+5)·A, S, S)`.
pub fn decode<S: Scalar>(
    feature_map: &TensorT<S>,
    config: &NetworkConfig,
    conf_threshold: f64,
) -> Result<Vec<Detection>> {
    if feature_map.shape().n != 1 {
        return Err(Error::ShapeMismatch {
            op: "decode",
            expected: "a single-image feature map".into(),
            actual: feature_map.shape().to_string(),
        });
    }
    decode_item(feature_map, 0, config, conf_threshold)
}

fn by_confidence(a: &Detection, b: &Detection) -> Ordering {
    b.confidence.partial_cmp(&a.confidence).unwrap_or(Ordering::Equal)
}

/// Per-class greedy suppression; survivors in descending confidence.
pub fn nms(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut sorted = detections.to_vec();
    sorted.sort_by(by_confidence);
    let mut kept: Vec<Detection> = Vec::new();
    for det in sorted {
        let suppressed = kept
            .iter()
            .any(|k| k.class_id == det.class_id && k.bbox.iou(&det.bbox) > iou_threshold);
        if !suppressed {
            kept.push(det);
        }
    }
    kept
}
