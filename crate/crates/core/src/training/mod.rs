//! Target assignment, detection loss and the SGD training loop.

mod anchors;
mod loss;
mod targets;

pub use anchors::kmeans_anchors;
pub use loss::detection_loss;
pub use targets::{anchor_ranking, assign_targets, centred_iou, SlotTarget, TargetMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::network::{ModelGrads, Profile};
use crate::tensor::TensorT;
use crate::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lambda_coord: f64,
    pub lambda_noobj: f64,
    pub seed: u64,
    pub profile: Profile,
    /// Epochs over which the learning rate ramps linearly up from zero
    /// (per step); 0 keeps it constant throughout.
    pub warmup_epochs: usize,
    /// Epochs after which the learning rate is multiplied by [`LR_STEP_SCALE`].
    pub lr_steps: Vec<usize>,
    /// Largest global L2 norm of the batch-mean gradient; larger gradients
    /// are rescaled to it. 0 disables clipping.
    pub grad_clip: f64,
}

pub const LR_STEP_SCALE: f64 = 0.1;

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 8,
            learning_rate: 1e-3,
            momentum: 0.9,
            weight_decay: 5e-4,
            lambda_coord: 5.0,
            lambda_noobj: 0.5,
            seed: 0,
            profile: Profile::Full,
            warmup_epochs: 0,
            lr_steps: Vec::new(),
            grad_clip: 0.0,
        }
    }
}

impl TrainConfig {
    fn learning_rate_at(&self, epoch: usize, step: usize, warmup_steps: usize) -> f64 {
        let decays = self.lr_steps.iter().filter(|&&s| epoch > s).count();
        let lr = self.learning_rate * LR_STEP_SCALE.powi(decays as i32);
        if step < warmup_steps {
            lr * step as f64 / warmup_steps as f64
        } else {
            lr
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be non-negative", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return Err(Error::invalid(format!("gradient clip {} must be non-negative", self.grad_clip)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        Ok(())
    }
}

/// One preprocessed training image with its grid targets.
#[derive(Debug, Clone)]
pub struct Sample {
    /// `(1, channels, size, size)`
    pub image: TensorT<f32>,
    pub targets: TargetMap,
}

struct Velocity {
    weights: Vec<f32>,
    bias: Vec<f32>,
    gamma: Vec<f32>,
    beta: Vec<f32>,
}

fn momentum_step(param: &mut [f32], velocity: &mut [f32], grad: &[f32], scale: f32, lr: f32, mu: f32, decay: f32) {
    for ((p, v), g) in param.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = mu * *v - lr * (g * scale + decay * *p);
        *p += *v;
    }
}

fn grad_norm(grads: &ModelGrads<f32>) -> f64 {
    grads
        .blocks
        .iter()
        .flat_map(|g| g.weights.data().iter().chain(&g.bias).chain(&g.gamma).chain(&g.beta))
        .map(|&v| (v as f64) * (v as f64))
        .sum::<f64>()
        .sqrt()
}

fn apply(model: &mut Model, grads: &ModelGrads<f32>, velocity: &mut [Velocity], batch: usize, lr: f64, cfg: &TrainConfig) {
    let mut scale = 1.0 / batch as f64;
    if cfg.grad_clip > 0.0 {
        let norm = grad_norm(grads) * scale;
        if norm > cfg.grad_clip {
            scale *= cfg.grad_clip / norm;
        }
    }
    let scale = scale as f32;
    let (lr, mu, decay) = (lr as f32, cfg.momentum as f32, cfg.weight_decay as f32);
    for ((block, g), v) in model.blocks_mut().iter_mut().zip(&grads.blocks).zip(velocity) {
        momentum_step(block.conv.weights.data_mut(), &mut v.weights, g.weights.data(), scale, lr, mu, decay);
        match block.bn.as_mut() {
            Some(bn) => {
                momentum_step(&mut bn.gamma, &mut v.gamma, &g.gamma, scale, lr, mu, 0.0);
                momentum_step(&mut bn.beta, &mut v.beta, &g.beta, scale, lr, mu, 0.0);
            }
            None => momentum_step(&mut block.conv.bias, &mut v.bias, &g.bias, scale, lr, mu, 0.0),
        }
    }
}

/// Mini-batch SGD with momentum and weight decay over `samples`.
///
/// The per-epoch mean loss (per image) is passed to `on_epoch` and
/// collected into the returned history. Identical inputs and seed give
/// bit-identical weights.
pub fn train(
    model: &mut Model,
    samples: &[Sample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let network = model.config().clone();
    let mut velocity: Vec<Velocity> = model
        .blocks()
        .iter()
        .map(|b| Velocity {
            weights: vec![0.0; b.conv.weights.len()],
            bias: vec![0.0; b.conv.bias.len()],
            gamma: vec![0.0; b.bn.as_ref().map_or(0, |p| p.channels())],
            beta: vec![0.0; b.bn.as_ref().map_or(0, |p| p.channels())],
        })
        .collect();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let warmup_steps = config.warmup_epochs * samples.len().div_ceil(config.batch_size);
    let mut step = 0usize;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let images: Vec<&TensorT<f32>> = chunk.iter().map(|&i| &samples[i].image).collect();
            let targets: Vec<TargetMap> = chunk.iter().map(|&i| samples[i].targets.clone()).collect();
            let batch = TensorT::stack(&images)?;
            let (out, trace) = model.forward_train(&batch)?;
            let (loss, grad) = match detection_loss(&out, &targets, &network, config) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) => {
                    on_epoch(epoch, f64::NAN);
                    return Err(Error::Diverged { epoch });
                }
                Err(e) => return Err(e),
            };
            total += loss;
            let grads = model.backward(&trace, &grad)?;
            step += 1;
            let lr = config.learning_rate_at(epoch, step, warmup_steps);
            apply(model, &grads, &mut velocity, chunk.len(), lr, config);
        }
        let mean = total / samples.len() as f64;
        on_epoch(epoch, mean);
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(mean);
    }
    Ok(history)
}

/// `epoch,mean_loss` lines with a header.
pub fn loss_history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, l) in history.iter().enumerate() {
        out.push_str(&format!("{},{l:.9}\n", i + 1));
    }
    out
}
