//! The 25-layer YOLOv2-style detector without route layers.
//!
//! Nineteen 3×3/1×1 convolution blocks (convolution, batch norm, leaky ReLU)
//! interleaved with five 2×2 max-pools, a linear 1×1 prediction head with
//! `(classes + 5) × anchors` filters, and a detection layer that
//! [`crate::head::decode`] interprets.

mod weights;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::ops::{
    batchnorm_backward, batchnorm_inference, batchnorm_train, conv2d_backward_with, conv2d_forward,
    leaky_relu, leaky_relu_backward, maxpool2, maxpool2_backward, BatchNormCache, BatchNormParams,
    ConvParams, LEAKY_SLOPE,
};
use crate::scalar::Scalar;
use crate::tensor::{Shape, TensorT};

pub use weights::{read_weights_header, WeightsHeader, WEIGHTS_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    MaxPool,
    Detection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    External,
    Internal,
    None,
}

/// Channels × height × width of one feature map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chw {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl fmt::Display for Chw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} x {} x {}", self.h, self.w, self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub index: usize,
    pub kind: LayerKind,
    pub group: Group,
    /// Filter count for convolutions, 0 otherwise.
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
    pub input: Chw,
    pub output: Chw,
}

/// Channel-width profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Table widths (32 … 1024 filters), 416 px input.
    Full,
    /// Quarter widths, 160 px input; for desk-scale experiments.
    Tiny,
}

impl Profile {
    pub fn width_divisor(self) -> usize {
        match self {
            Profile::Full => 1,
            Profile::Tiny => 4,
        }
    }

    pub fn default_input_size(self) -> usize {
        match self {
            Profile::Full => 416,
            Profile::Tiny => 160,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Full => "full",
            Profile::Tiny => "tiny",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "tiny" => Ok(Profile::Tiny),
            other => Err(Error::invalid(format!("unknown profile {other:?} (expected full or tiny)"))),
        }
    }
}

/// Prior box size in grid-cell units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub w: f64,
    pub h: f64,
}

pub const DEFAULT_ANCHORS: [Anchor; 5] = [
    Anchor { w: 0.6, h: 0.9 },
    Anchor { w: 1.2, h: 1.8 },
    Anchor { w: 2.4, h: 3.2 },
    Anchor { w: 4.5, h: 5.5 },
    Anchor { w: 8.0, h: 9.0 },
];

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub num_classes: usize,
    pub num_anchors: usize,
    pub input_channels: usize,
    pub input_size: usize,
    pub anchors: Vec<Anchor>,
    pub profile: Profile,
}

impl NetworkConfig {
    /// Full profile, 3-channel 416 px input, five default anchors.
    pub fn new(num_classes: usize) -> Self {
        NetworkConfig {
            num_classes,
            num_anchors: DEFAULT_ANCHORS.len(),
            input_channels: 3,
            input_size: Profile::Full.default_input_size(),
            anchors: DEFAULT_ANCHORS.to_vec(),
            profile: Profile::Full,
        }
    }

    pub fn tiny(num_classes: usize) -> Self {
        NetworkConfig {
            input_size: Profile::Tiny.default_input_size(),
            profile: Profile::Tiny,
            ..Self::new(num_classes)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.num_classes) {
            return Err(Error::invalid(format!(
                "number of classes must be 1 or 2, got {}",
                self.num_classes
            )));
        }
        if self.num_anchors == 0 {
            return Err(Error::invalid("number of anchors must be positive"));
        }
        if self.anchors.len() != self.num_anchors {
            return Err(Error::invalid(format!(
                "{} anchor priors given for {} anchors",
                self.anchors.len(),
                self.num_anchors
            )));
        }
        if self
            .anchors
            .iter()
            .any(|a| !(a.w > 0.0 && a.h > 0.0 && a.w.is_finite() && a.h.is_finite()))
        {
            return Err(Error::invalid("anchor priors must be positive"));
        }
        if !(self.input_channels == 1 || self.input_channels == 3) {
            return Err(Error::invalid(format!(
                "input channels must be 1 or 3, got {}",
                self.input_channels
            )));
        }
        if self.input_size == 0 || self.input_size % 32 != 0 {
            return Err(Error::invalid(format!(
                "input size must be a positive multiple of 32, got {}",
                self.input_size
            )));
        }
        Ok(())
    }

    /// Filters of the prediction head: `(C + 5) × A`.
    pub fn head_filters(&self) -> usize {
        (self.num_classes + 5) * self.num_anchors
    }

    /// Side of the output grid.
    pub fn grid_size(&self) -> usize {
        self.input_size / 32
    }

    pub fn input_shape(&self, batch: usize) -> Shape {
        Shape::new(batch, self.input_channels, self.input_size, self.input_size)
    }

    pub fn output_shape(&self, batch: usize) -> Shape {
        let s = self.grid_size();
        Shape::new(batch, self.head_filters(), s, s)
    }
}

enum Row {
    Conv(Group, usize, usize),
    Max,
    Head,
    Detection,
}

const TABLE: [Row; 25] = [
    Row::Conv(Group::External, 32, 3),
    Row::Max,
    Row::Conv(Group::External, 64, 3),
    Row::Max,
    Row::Conv(Group::External, 128, 3),
    Row::Conv(Group::Internal, 64, 1),
    Row::Conv(Group::External, 128, 3),
    Row::Max,
    Row::Conv(Group::External, 256, 3),
    Row::Conv(Group::Internal, 128, 1),
    Row::Conv(Group::External, 256, 3),
    Row::Max,
    Row::Conv(Group::External, 512, 3),
    Row::Conv(Group::Internal, 256, 1),
    Row::Conv(Group::External, 512, 3),
    Row::Conv(Group::Internal, 256, 1),
    Row::Conv(Group::External, 512, 3),
    Row::Max,
    Row::Conv(Group::External, 1024, 3),
    Row::Conv(Group::Internal, 512, 1),
    Row::Conv(Group::External, 1024, 3),
    Row::Conv(Group::Internal, 512, 1),
    Row::Conv(Group::External, 1024, 3),
    Row::Head,
    Row::Detection,
];

/// The 25 layer rows for `config`, with shapes propagated from the input.
pub fn layer_specs(config: &NetworkConfig) -> Result<Vec<LayerSpec>> {
    config.validate()?;
    let div = config.profile.width_divisor();
    let mut cur = Chw {
        c: config.input_channels,
        h: config.input_size,
        w: config.input_size,
    };
    let mut specs = Vec::with_capacity(TABLE.len());
    for (index, row) in TABLE.iter().enumerate() {
        let (kind, group, filters, kernel, stride, output) = match *row {
            Row::Conv(group, filters, kernel) => {
                let f = filters / div;
                (LayerKind::Conv, group, f, kernel, 1, Chw { c: f, ..cur })
            }
            Row::Head => {
                let f = config.head_filters();
                (LayerKind::Conv, Group::None, f, 1, 1, Chw { c: f, ..cur })
            }
            Row::Max => (
                LayerKind::MaxPool,
                Group::None,
                0,
                2,
                2,
                Chw {
                    c: cur.c,
                    h: cur.h / 2,
                    w: cur.w / 2,
                },
            ),
            Row::Detection => (LayerKind::Detection, Group::None, 0, 0, 0, cur),
        };
        specs.push(LayerSpec {
            index,
            kind,
            group,
            filters,
            kernel,
            stride,
            input: cur,
            output,
        });
        cur = output;
    }
    Ok(specs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<S> {
    pub layer: usize,
    pub conv: ConvParams<S>,
    /// Absent on the prediction head, which keeps a plain bias instead.
    pub bn: Option<BatchNormParams<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelT<S> {
    config: NetworkConfig,
    layers: Vec<LayerSpec>,
    blocks: Vec<ConvBlock<S>>,
}

/// Per-block parameter gradients, in block order.
#[derive(Debug, Clone)]
pub struct BlockGrads<S> {
    pub weights: TensorT<S>,
    pub bias: Vec<S>,
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct ModelGrads<S> {
    pub blocks: Vec<BlockGrads<S>>,
}

enum Step<S> {
    Conv {
        input: TensorT<S>,
        bn: Option<(BatchNormCache<S>, TensorT<S>)>,
    },
    Pool {
        input: TensorT<S>,
    },
    Passthrough,
}

/// Intermediate values kept by [`ModelT::forward_train`] for the backward pass.
pub struct ForwardTrace<S> {
    steps: Vec<Step<S>>,
}

/// Builds the detector with He-scaled uniform weights from a seeded generator.
pub fn build_yolov2(config: &NetworkConfig, seed: u64) -> Result<ModelT<f32>> {
    ModelT::build(config, seed)
}

impl<S: Scalar> ModelT<S> {
    pub fn build(config: &NetworkConfig, seed: u64) -> Result<Self> {
        let layers = layer_specs(config)?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut blocks = Vec::new();
        for spec in layers.iter().filter(|l| l.kind == LayerKind::Conv) {
            let fan_in = spec.input.c * spec.kernel * spec.kernel;
            let is_head = spec.group == Group::None;
            // He-uniform for rectified blocks, LeCun-uniform for the linear head
            let gain = if is_head { 1.0 } else { 2.0 };
            let limit = (3.0 * gain / fan_in as f64).sqrt();
            let wshape = Shape::new(spec.filters, spec.input.c, spec.kernel, spec.kernel);
            let data = (0..wshape.len())
                .map(|_| S::from_f64_lossy(rng.random_range(-limit..limit)))
                .collect();
            let conv = ConvParams::new(TensorT::from_vec(wshape, data)?, vec![S::zero(); spec.filters])?;
            let bn = (!is_head).then(|| BatchNormParams::identity(spec.filters));
            blocks.push(ConvBlock {
                layer: spec.index,
                conv,
                bn,
            });
        }
        Ok(ModelT {
            config: config.clone(),
            layers,
            blocks,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn blocks(&self) -> &[ConvBlock<S>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ConvBlock<S>] {
        &mut self.blocks
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.conv.weights.len() + b.conv.bias.len() + b.bn.as_ref().map_or(0, |p| 2 * p.channels()))
            .sum()
    }

    /// Same model in another scalar type.
    pub fn cast<T: Scalar>(&self) -> ModelT<T> {
        let conv_vec = |v: &[S]| v.iter().map(|&x| T::from_f64_lossy(x.to_f64_lossy())).collect::<Vec<T>>();
        ModelT {
            config: self.config.clone(),
            layers: self.layers.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| ConvBlock {
                    layer: b.layer,
                    conv: ConvParams {
                        weights: b.conv.weights.cast(),
                        bias: conv_vec(&b.conv.bias),
                    },
                    bn: b.bn.as_ref().map(|p| BatchNormParams {
                        gamma: conv_vec(&p.gamma),
                        beta: conv_vec(&p.beta),
                        running_mean: conv_vec(&p.running_mean),
                        running_var: conv_vec(&p.running_var),
                        epsilon: T::from_f64_lossy(p.epsilon.to_f64_lossy()),
                        momentum: T::from_f64_lossy(p.momentum.to_f64_lossy()),
                    }),
                })
                .collect(),
        }
    }

    fn check_input(&self, input: &TensorT<S>) -> Result<()> {
        let s = input.shape();
        let want = self.config.input_shape(s.n);
        if s != want || s.n == 0 {
            return Err(Error::LayerShape {
                layer: 0,
                expected: format!("(*, {}, {}, {})", want.c, want.h, want.w),
                actual: s.to_string(),
            });
        }
        Ok(())
    }

    fn check_layer(spec: &LayerSpec, x: &TensorT<S>) -> Result<()> {
        let s = x.shape();
        if (s.c, s.h, s.w) != (spec.input.c, spec.input.h, spec.input.w) {
            return Err(Error::LayerShape {
                layer: spec.index,
                expected: spec.input.to_string(),
                actual: s.to_string(),
            });
        }
        Ok(())
    }

    /// Inference pass using running batch-norm statistics.
    pub fn forward(&self, input: &TensorT<S>) -> Result<TensorT<S>> {
        self.check_input(input)?;
        let slope = S::from_f64_lossy(LEAKY_SLOPE);
        let mut x = input.clone();
        let mut blocks = self.blocks.iter();
        for spec in &self.layers {
            Self::check_layer(spec, &x)?;
            x = match spec.kind {
                LayerKind::Conv => {
                    let block = blocks.next().expect("one block per conv layer");
                    let z = conv2d_forward(&x, &block.conv)?;
                    match &block.bn {
                        Some(bn) => leaky_relu(&batchnorm_inference(&z, bn)?, slope),
                        None => z,
                    }
                }
                LayerKind::MaxPool => maxpool2(&x)?,
                LayerKind::Detection => x,
            };
        }
        Ok(x)
    }

    /// Training pass: batch-norm uses batch statistics (updating the running
    /// ones) and intermediates are kept for [`ModelT::backward`].
    pub fn forward_train(&mut self, input: &TensorT<S>) -> Result<(TensorT<S>, ForwardTrace<S>)> {
        self.check_input(input)?;
        let slope = S::from_f64_lossy(LEAKY_SLOPE);
        let mut x = input.clone();
        let mut steps = Vec::with_capacity(self.layers.len());
        let mut blocks = self.blocks.iter_mut();
        for spec in &self.layers {
            Self::check_layer(spec, &x)?;
            match spec.kind {
                LayerKind::Conv => {
                    let block = blocks.next().expect("one block per conv layer");
                    let z = conv2d_forward(&x, &block.conv)?;
                    match block.bn.as_mut() {
                        Some(bn) => {
                            let (y, cache) = batchnorm_train(&z, bn)?;
                            let a = leaky_relu(&y, slope);
                            steps.push(Step::Conv {
                                input: x,
                                bn: Some((cache, y)),
                            });
                            x = a;
                        }
                        None => {
                            steps.push(Step::Conv { input: x, bn: None });
                            x = z;
                        }
                    }
                }
                LayerKind::MaxPool => {
                    let p = maxpool2(&x)?;
                    steps.push(Step::Pool { input: x });
                    x = p;
                }
                LayerKind::Detection => steps.push(Step::Passthrough),
            }
        }
        Ok((x, ForwardTrace { steps }))
    }

    /// Parameter gradients given the gradient of the loss w.r.t. the output.
    pub fn backward(&self, trace: &ForwardTrace<S>, grad_out: &TensorT<S>) -> Result<ModelGrads<S>> {
        let slope = S::from_f64_lossy(LEAKY_SLOPE);
        let mut grads: Vec<Option<BlockGrads<S>>> = vec![None; self.blocks.len()];
        let mut g = grad_out.clone();
        let mut block_idx = self.blocks.len();
        for (pos, step) in trace.steps.iter().enumerate().rev() {
            match step {
                Step::Passthrough => {}
                Step::Pool { input } => g = maxpool2_backward(input, &g)?,
                Step::Conv { input, bn } => {
                    block_idx -= 1;
                    let block = &self.blocks[block_idx];
                    let (gz, gamma, beta) = match (bn, &block.bn) {
                        (Some((cache, y)), Some(params)) => {
                            let gy = leaky_relu_backward(y, &g, slope)?;
                            let b = batchnorm_backward(&gy, cache, params)?;
                            (b.input, b.gamma, b.beta)
                        }
                        _ => (g, Vec::new(), Vec::new()),
                    };
                    let need_input = pos > 0;
                    let cg = conv2d_backward_with(input, &block.conv, &gz, need_input)?;
                    grads[block_idx] = Some(BlockGrads {
                        weights: cg.weights,
                        bias: cg.bias,
                        gamma,
                        beta,
                    });
                    g = cg.input.unwrap_or_else(|| TensorT::zeros(input.shape()));
                }
            }
        }
        Ok(ModelGrads {
            blocks: grads
                .into_iter()
                .map(|g| g.expect("every block visited"))
                .collect(),
        })
    }
}
