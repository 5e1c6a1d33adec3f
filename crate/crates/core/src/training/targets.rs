//! Ground-truth to grid-slot assignment.
//!
//! A box is owned by the cell containing its centre and, within that cell,
//! by the prior whose co-centred IoU with the box is highest. When the slot
//! is already owned by an earlier box, the later box falls back to its next
//! best prior.

use crate::error::{Error, Result};
use crate::head::BBox;
use crate::network::{Anchor, NetworkConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotTarget {
    /// Model-local class index.
    pub class: usize,
    /// Centre offset inside the cell, compared against `σ(tx)`, `σ(ty)`.
    pub x: f64,
    pub y: f64,
    /// Log size ratio to the prior, compared against `tw`, `th`.
    pub tw: f64,
    pub th: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMap {
    grid: usize,
    num_anchors: usize,
    slots: Vec<Option<SlotTarget>>,
}

impl TargetMap {
    pub fn empty(grid: usize, num_anchors: usize) -> Self {
        TargetMap {
            grid,
            num_anchors,
            slots: vec![None; grid * grid * num_anchors],
        }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn num_anchors(&self) -> usize {
        self.num_anchors
    }

    pub fn get(&self, row: usize, col: usize, anchor: usize) -> Option<&SlotTarget> {
        self.slots[(row * self.grid + col) * self.num_anchors + anchor].as_ref()
    }

    /// `(row, col, anchor, target)` for every responsible slot.
    pub fn responsible(&self) -> impl Iterator<Item = (usize, usize, usize, &SlotTarget)> {
        let (g, a) = (self.grid, self.num_anchors);
        self.slots
            .iter()
            .enumerate()
            .filter_map(move |(i, s)| s.as_ref().map(|t| (i / a / g, i / a % g, i % a, t)))
    }

    pub fn responsible_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }
}

/// IoU of two rectangles sharing a centre.
pub fn centred_iou(w0: f64, h0: f64, w1: f64, h1: f64) -> f64 {
    let inter = w0.min(w1) * h0.min(h1);
    inter / (w0 * h0 + w1 * h1 - inter)
}

/// Prior indices ordered by decreasing IoU with a box of size `(w, h)`
/// (in cell units); equal IoUs keep index order.
pub fn anchor_ranking(w: f64, h: f64, anchors: &[Anchor]) -> Vec<usize> {
    let ious: Vec<f64> = anchors.iter().map(|a| centred_iou(w, h, a.w, a.h)).collect();
    let mut order: Vec<usize> = (0..anchors.len()).collect();
    order.sort_by(|&a, &b| ious[b].partial_cmp(&ious[a]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

pub fn assign_targets(annotations: &[(usize, BBox)], config: &NetworkConfig) -> Result<TargetMap> {
    let grid = config.grid_size();
    let s = grid as f64;
    let mut map = TargetMap::empty(grid, config.num_anchors);
    for &(class, bbox) in annotations {
        if class >= config.num_classes {
            return Err(Error::UnknownClass(class));
        }
        if !(0.0..=1.0).contains(&bbox.cx) || !(0.0..=1.0).contains(&bbox.cy) {
            return Err(Error::invalid(format!(
                "box centre ({}, {}) outside the image",
                bbox.cx, bbox.cy
            )));
        }
        if !(bbox.w > 0.0 && bbox.h > 0.0) {
            return Err(Error::invalid(format!("box size ({}, {}) not positive", bbox.w, bbox.h)));
        }
        let col = ((bbox.cx * s) as usize).min(grid - 1);
        let row = ((bbox.cy * s) as usize).min(grid - 1);
        let (w, h) = (bbox.w * s, bbox.h * s);
        let slot = anchor_ranking(w, h, &config.anchors)
            .into_iter()
            .find(|&a| map.get(row, col, a).is_none())
            .ok_or_else(|| {
                Error::invalid(format!("more boxes than anchors in cell ({row}, {col})"))
            })?;
        let prior = config.anchors[slot];
        map.slots[(row * grid + col) * config.num_anchors + slot] = Some(SlotTarget {
            class,
            x: bbox.cx * s - col as f64,
            y: bbox.cy * s - row as f64,
            tw: (w / prior.w).ln(),
            th: (h / prior.h).ln(),
        });
    }
    Ok(map)
}
