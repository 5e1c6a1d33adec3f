//! Multi-part sum-squared detection loss and its gradient w.r.t. the raw head output.

use crate::error::{Error, Result};
use crate::head::{channel, sigmoid, softmax};
use crate::network::NetworkConfig;
use crate::scalar::Scalar;
use crate::tensor::TensorT;
use crate::training::{TargetMap, TrainConfig};

/// Loss summed over the batch, and its gradient.
///
/// Per image:
/// `λ_coord·Σ_resp[(σ(tx)−x)² + (σ(ty)−y)² + (tw−t̂w)² + (th−t̂h)²]
///  + Σ_resp (σ(to)−1)² + λ_noobj·Σ_other σ(to)² + Σ_resp CE(class)`.
/// The class term vanishes for single-class heads.
pub fn detection_loss<S: Scalar>(
    raw_output: &TensorT<S>,
    targets: &[TargetMap],
    network: &NetworkConfig,
    config: &TrainConfig,
) -> Result<(f64, TensorT<S>)> {
    let shape = raw_output.shape();
    let grid = network.grid_size();
    raw_output.expect_shape("detection loss", network.output_shape(targets.len()))?;
    if let Some(t) = targets.iter().find(|t| t.grid() != grid || t.num_anchors() != network.num_anchors) {
        return Err(Error::ShapeMismatch {
            op: "detection loss targets",
            expected: format!("{grid}x{grid} grid with {} anchors", network.num_anchors),
            actual: format!("{0}x{0} grid with {1} anchors", t.grid(), t.num_anchors()),
        });
    }
    let (lc, ln) = (config.lambda_coord, config.lambda_noobj);
    let c = network.num_classes;
    let plane = shape.plane();
    let mut grad = TensorT::<S>::zeros(shape);
    let mut loss = 0.0f64;
    let mut logits = vec![0.0; c];

    for (n, target) in targets.iter().enumerate() {
        let raw = raw_output.item(n);
        let g = grad.item_mut(n);
        for row in 0..grid {
            for col in 0..grid {
                let cell = row * grid + col;
                for a in 0..network.num_anchors {
                    let idx = |field: usize| channel(a, field, c) * plane + cell;
                    let at = |field: usize| raw[idx(field)].to_f64_lossy();
                    let p = sigmoid(at(4));
                    match target.get(row, col, a) {
                        None => {
                            loss += ln * p * p;
                            g[idx(4)] = S::from_f64_lossy(2.0 * ln * p * p * (1.0 - p));
                        }
                        Some(t) => {
                            loss += (p - 1.0) * (p - 1.0);
                            g[idx(4)] = S::from_f64_lossy(2.0 * (p - 1.0) * p * (1.0 - p));

                            for (field, want) in [(0, t.x), (1, t.y)] {
                                let s = sigmoid(at(field));
                                loss += lc * (s - want) * (s - want);
                                g[idx(field)] = S::from_f64_lossy(2.0 * lc * (s - want) * s * (1.0 - s));
                            }
                            for (field, want) in [(2, t.tw), (3, t.th)] {
                                let d = at(field) - want;
                                loss += lc * d * d;
                                g[idx(field)] = S::from_f64_lossy(2.0 * lc * d);
                            }
                            if c > 1 {
                                for (k, l) in logits.iter_mut().enumerate() {
                                    *l = at(5 + k);
                                }
                                let probs = softmax(&logits);
                                loss -= probs[t.class].ln();
                                for (k, pk) in probs.iter().enumerate() {
                                    let onehot = if k == t.class { 1.0 } else { 0.0 };
                                    g[idx(5 + k)] = S::from_f64_lossy(pk - onehot);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("detection loss"));
    }
    Ok((loss, grad))
}
