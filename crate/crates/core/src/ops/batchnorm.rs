//! Per-channel batch normalization over (batch, height, width).

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::TensorT;

pub const DEFAULT_EPSILON: f64 = 1e-5;
/// Weight kept by the running statistics at each update:
/// `running = momentum · running + (1 − momentum) · batch`.
pub const DEFAULT_MOMENTUM: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams<S> {
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
    pub running_mean: Vec<S>,
    pub running_var: Vec<S>,
    pub epsilon: S,
    pub momentum: S,
}

impl<S: Scalar> BatchNormParams<S> {
    /// Identity initialisation: gamma 1, beta 0, running mean 0, running variance 1.
    pub fn identity(channels: usize) -> Self {
        BatchNormParams {
            gamma: vec![S::one(); channels],
            beta: vec![S::zero(); channels],
            running_mean: vec![S::zero(); channels],
            running_var: vec![S::one(); channels],
            epsilon: S::from_f64_lossy(DEFAULT_EPSILON),
            momentum: S::from_f64_lossy(DEFAULT_MOMENTUM),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn validate(&self, input: &TensorT<S>) -> Result<()> {
        let c = self.channels();
        if c == 0 {
            return Err(Error::invalid("batch norm with zero channels"));
        }
        if [self.beta.len(), self.running_mean.len(), self.running_var.len()]
            .iter()
            .any(|&l| l != c)
        {
            return Err(Error::invalid("batch norm parameter vectors differ in length"));
        }
        if input.shape().c != c {
            return Err(Error::ShapeMismatch {
                op: "batch norm",
                expected: format!("{c} channels"),
                actual: input.shape().to_string(),
            });
        }
        Ok(())
    }
}

/// Saved by the training-mode forward pass for [`batchnorm_backward`].
#[derive(Debug, Clone)]
pub struct BatchNormCache<S> {
    normalized: TensorT<S>,
    inv_std: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<S> {
    pub input: TensorT<S>,
    pub gamma: Vec<S>,
    pub beta: Vec<S>,
}

fn channel_chunks<S: Scalar>(t: &TensorT<S>, c: usize) -> impl Iterator<Item = &[S]> {
    let s = t.shape();
    let plane = s.plane();
    (0..s.n).map(move |n| &t.data()[(n * s.c + c) * plane..(n * s.c + c + 1) * plane])
}

fn affine<S: Scalar>(
    input: &TensorT<S>,
    mean: &[S],
    inv_std: &[S],
    gamma: &[S],
    beta: &[S],
) -> (TensorT<S>, TensorT<S>) {
    let s = input.shape();
    let plane = s.plane();
    let mut normalized = TensorT::zeros(s);
    let mut out = TensorT::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let off = (n * s.c + c) * plane;
            let src = &input.data()[off..off + plane];
            let xn = &mut normalized.data_mut()[off..off + plane];
            for (d, &x) in xn.iter_mut().zip(src) {
                *d = (x - mean[c]) * inv_std[c];
            }
            let xn = &normalized.data()[off..off + plane];
            let dst = &mut out.data_mut()[off..off + plane];
            for (d, &v) in dst.iter_mut().zip(xn) {
                *d = gamma[c] * v + beta[c];
            }
        }
    }
    (out, normalized)
}

/// Normalizes with the running statistics.
pub fn batchnorm_inference<S: Scalar>(
    input: &TensorT<S>,
    params: &BatchNormParams<S>,
) -> Result<TensorT<S>> {
    params.validate(input)?;
    let inv_std: Vec<S> = params
        .running_var
        .iter()
        .map(|&v| (v + params.epsilon).sqrt().recip())
        .collect();
    Ok(affine(input, &params.running_mean, &inv_std, &params.gamma, &params.beta).0)
}

/// Normalizes with batch statistics and folds them into the running
/// statistics.
pub fn batchnorm_train<S: Scalar>(
    input: &TensorT<S>,
    params: &mut BatchNormParams<S>,
) -> Result<(TensorT<S>, BatchNormCache<S>)> {
    params.validate(input)?;
    let s = input.shape();
    // accumulate in f64 so that constant channels give an exact mean
    let count = (s.n * s.plane()) as f64;
    let mut mean = vec![S::zero(); s.c];
    let mut var = vec![S::zero(); s.c];
    for c in 0..s.c {
        let m = channel_chunks(input, c)
            .flat_map(|ch| ch.iter())
            .map(|&x| x.to_f64_lossy())
            .sum::<f64>()
            / count;
        let v = channel_chunks(input, c)
            .flat_map(|ch| ch.iter())
            .map(|&x| (x.to_f64_lossy() - m).powi(2))
            .sum::<f64>()
            / count;
        mean[c] = S::from_f64_lossy(m);
        var[c] = S::from_f64_lossy(v);
    }
    let inv_std: Vec<S> = var.iter().map(|&v| (v + params.epsilon).sqrt().recip()).collect();
    let (out, normalized) = affine(input, &mean, &inv_std, &params.gamma, &params.beta);

    let keep = params.momentum;
    let fresh = S::one() - keep;
    for c in 0..s.c {
        params.running_mean[c] = keep * params.running_mean[c] + fresh * mean[c];
        params.running_var[c] = keep * params.running_var[c] + fresh * var[c];
    }
    Ok((out, BatchNormCache { normalized, inv_std }))
}

/// `training` selects batch statistics (and updates the running ones)
/// versus running statistics.
pub fn batchnorm_apply<S: Scalar>(
    input: &TensorT<S>,
    params: &mut BatchNormParams<S>,
    training: bool,
) -> Result<TensorT<S>> {
    if training {
        batchnorm_train(input, params).map(|(out, _)| out)
    } else {
        batchnorm_inference(input, params)
    }
}

/// Gradient of the batch-statistics forward map.
pub fn batchnorm_backward<S: Scalar>(
    grad_out: &TensorT<S>,
    cache: &BatchNormCache<S>,
    params: &BatchNormParams<S>,
) -> Result<BatchNormGrads<S>> {
    let s = cache.normalized.shape();
    grad_out.expect_shape("batch norm backward", s)?;
    let plane = s.plane();
    let count = S::from_usize(s.n * plane).unwrap();
    let mut grad_gamma = vec![S::zero(); s.c];
    let mut grad_beta = vec![S::zero(); s.c];
    for c in 0..s.c {
        for (g, xn) in channel_chunks(grad_out, c).zip(channel_chunks(&cache.normalized, c)) {
            for (&gv, &xv) in g.iter().zip(xn) {
                grad_beta[c] += gv;
                grad_gamma[c] += gv * xv;
            }
        }
    }
    // dx = γ·inv_std/m · (m·dy − Σdy − x̂·Σ(dy·x̂))
    let mut grad_in = TensorT::zeros(s);
    for n in 0..s.n {
        for c in 0..s.c {
            let off = (n * s.c + c) * plane;
            let scale = params.gamma[c] * cache.inv_std[c] / count;
            let g = &grad_out.data()[off..off + plane];
            let xn = &cache.normalized.data()[off..off + plane];
            let dst = &mut grad_in.data_mut()[off..off + plane];
            for ((d, &gv), &xv) in dst.iter_mut().zip(g).zip(xn) {
                *d = scale * (count * gv - grad_beta[c] - xv * grad_gamma[c]);
            }
        }
    }
    Ok(BatchNormGrads {
        input: grad_in,
        gamma: grad_gamma,
        beta: grad_beta,
    })
}
