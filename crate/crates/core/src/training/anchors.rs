//! Prior sizes by k-means over training boxes with `1 − IoU` distance.

use crate::error::{Error, Result};
use crate::network::Anchor;
use crate::training::targets::centred_iou;

/// Clusters box sizes (already in grid-cell units) into `k` priors,
/// returned in increasing area. Deterministic: centroids start at the
/// area quantiles of the input.
pub fn kmeans_anchors(sizes: &[(f64, f64)], k: usize) -> Result<Vec<Anchor>> {
    if k == 0 || sizes.len() < k {
        return Err(Error::invalid(format!(
            "k-means needs at least {k} boxes, got {}",
            sizes.len()
        )));
    }
    let mut by_area = sizes.to_vec();
    by_area.sort_by(|a, b| (a.0 * a.1).partial_cmp(&(b.0 * b.1)).unwrap());
    let mut centroids: Vec<(f64, f64)> = (0..k)
        .map(|i| by_area[(2 * i + 1) * by_area.len() / (2 * k)])
        .collect();

    let mut assignment = vec![usize::MAX; sizes.len()];
    for _ in 0..200 {
        let mut changed = false;
        for (slot, &(w, h)) in assignment.iter_mut().zip(sizes) {
            let best = (0..k)
                .max_by(|&a, &b| {
                    let ia = centred_iou(w, h, centroids[a].0, centroids[a].1);
                    let ib = centred_iou(w, h, centroids[b].0, centroids[b].1);
                    ia.partial_cmp(&ib).unwrap().then(b.cmp(&a))
                })
                .unwrap();
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        for (j, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<_> = sizes
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == j)
                .map(|(s, _)| *s)
                .collect();
            if !members.is_empty() {
                let n = members.len() as f64;
                *centroid = (
                    members.iter().map(|m| m.0).sum::<f64>() / n,
                    members.iter().map(|m| m.1).sum::<f64>() / n,
                );
            }
        }
        if !changed {
            break;
        }
    }
    centroids.sort_by(|a, b| (a.0 * a.1).partial_cmp(&(b.0 * b.1)).unwrap());
    Ok(centroids.into_iter().map(|(w, h)| Anchor { w, h }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_two_clusters() {
        let mut sizes = vec![];
        for i in 0..10 {
            let d = i as f64 * 0.01;
            sizes.push((1.0 + d, 1.0 - d));
            sizes.push((3.0 + d, 2.0 - d));
        }
        let a = kmeans_anchors(&sizes, 2).unwrap();
        assert!((a[0].w - 1.045).abs() < 1e-9 && (a[1].w - 3.045).abs() < 1e-9);
    }

    #[test]
    fn too_few_boxes() {
        assert!(kmeans_anchors(&[(1.0, 1.0)], 2).is_err());
    }
}
