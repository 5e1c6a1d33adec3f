//! Stride-1 same-padded 2-D convolution (cross-correlation, no kernel flip).
//!
//! Lowered to a matrix product per batch item: the padded input windows
//! are unrolled into a `(in_channels·k·k) × (H·W)` column buffer and
//! multiplied by the `out_channels × (in_channels·k·k)` filter matrix.
//! 1×1 kernels use the input plane directly.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, TensorT};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<S> {
    /// `(out_channels, in_channels, kernel, kernel)`
    pub weights: TensorT<S>,
    pub bias: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<S> {
    pub input: Option<TensorT<S>>,
    pub weights: TensorT<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> ConvParams<S> {
    pub fn new(weights: TensorT<S>, bias: Vec<S>) -> Result<Self> {
        let s = weights.shape();
        if s.h != s.w || !(s.h == 1 || s.h == 3) {
            return Err(Error::invalid(format!(
                "convolution kernel must be 1x1 or 3x3, got {}x{}",
                s.h, s.w
            )));
        }
        if s.n == 0 || s.c == 0 {
            return Err(Error::invalid(format!("empty convolution filter bank {s}")));
        }
        if bias.len() != s.n {
            return Err(Error::ShapeMismatch {
                op: "conv2d bias",
                expected: format!("{} entries", s.n),
                actual: format!("{} entries", bias.len()),
            });
        }
        Ok(ConvParams { weights, bias })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel: usize) -> Result<Self> {
        Self::new(
            TensorT::zeros(Shape::new(out_channels, in_channels, kernel, kernel)),
            vec![S::zero(); out_channels],
        )
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape().n
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape().c
    }

    pub fn kernel(&self) -> usize {
        self.weights.shape().h
    }

    pub fn padding(&self) -> usize {
        self.kernel() / 2
    }

    fn check_input(&self, input: &TensorT<S>) -> Result<()> {
        let s = input.shape();
        if s.c != self.in_channels() || s.h == 0 || s.w == 0 {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                expected: format!("(*, {}, >0, >0) for filters {}", self.in_channels(), self.weights.shape()),
                actual: s.to_string(),
            });
        }
        Ok(())
    }

    pub fn output_shape(&self, input: Shape) -> Shape {
        Shape::new(input.n, self.out_channels(), input.h, input.w)
    }
}

fn fill_row<S: Scalar>(dst: &mut [S], src: &[S], shift: isize) {
    let w = dst.len() as isize;
    let x0 = (-shift).clamp(0, w) as usize;
    let x1 = (w - shift).clamp(0, w) as usize;
    dst[..x0].fill(S::zero());
    dst[x1..].fill(S::zero());
    if x0 < x1 {
        let s0 = (x0 as isize + shift) as usize;
        dst[x0..x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
    }
}

fn accumulate_row<S: Scalar>(dst: &mut [S], src: &[S], shift: isize) {
    // inverse of fill_row: dst[x + shift] += src[x]
    let w = src.len() as isize;
    let x0 = (-shift).clamp(0, w) as usize;
    let x1 = (w - shift).clamp(0, w) as usize;
    for x in x0..x1 {
        dst[(x as isize + shift) as usize] += src[x];
    }
}

fn im2col<S: Scalar>(src: &[S], c: usize, h: usize, w: usize, k: usize, cols: &mut [S]) {
    let pad = (k / 2) as isize;
    let plane = h * w;
    for ci in 0..c {
        let channel = &src[ci * plane..(ci + 1) * plane];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    let drow = &mut dst[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        drow.fill(S::zero());
                    } else {
                        let sy = sy as usize;
                        fill_row(drow, &channel[sy * w..(sy + 1) * w], dx);
                    }
                }
            }
        }
    }
}

fn col2im<S: Scalar>(cols: &[S], c: usize, h: usize, w: usize, k: usize, dst: &mut [S]) {
    let pad = (k / 2) as isize;
    let plane = h * w;
    dst.fill(S::zero());
    for ci in 0..c {
        let channel = &mut dst[ci * plane..(ci + 1) * plane];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &cols[row * plane..(row + 1) * plane];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let sy = sy as usize;
                    accumulate_row(
                        &mut channel[sy * w..(sy + 1) * w],
                        &src[y * w..(y + 1) * w],
                        dx,
                    );
                }
            }
        }
    }
}

pub fn conv2d_forward<S: Scalar>(input: &TensorT<S>, params: &ConvParams<S>) -> Result<TensorT<S>> {
    params.check_input(input)?;
    let s = input.shape();
    let k = params.kernel();
    let plane = s.plane();
    let depth = s.c * k * k;
    let cout = params.out_channels();
    let mut out = TensorT::zeros(params.output_shape(s));
    let mut cols = if k == 1 { Vec::new() } else { vec![S::zero(); depth * plane] };

    for n in 0..s.n {
        let src = input.item(n);
        let dst = out.item_mut(n);
        for (o, b) in params.bias.iter().enumerate() {
            dst[o * plane..(o + 1) * plane].fill(*b);
        }
        let rhs: &[S] = if k == 1 {
            src
        } else {
            im2col(src, s.c, s.h, s.w, k, &mut cols);
            &cols
        };
        S::gemm(
            cout,
            depth,
            plane,
            params.weights.data(),
            (depth, 1),
            rhs,
            (plane, 1),
            S::one(),
            dst,
            (plane, 1),
        );
    }
    Ok(out)
}

/// Analytic gradients of [`conv2d_forward`].
pub fn conv2d_backward<S: Scalar>(
    input: &TensorT<S>,
    params: &ConvParams<S>,
    grad_out: &TensorT<S>,
) -> Result<ConvGrads<S>> {
    conv2d_backward_with(input, params, grad_out, true)
}

/// Like [`conv2d_backward`], optionally skipping the input gradient
/// (first layer of a network).
pub fn conv2d_backward_with<S: Scalar>(
    input: &TensorT<S>,
    params: &ConvParams<S>,
    grad_out: &TensorT<S>,
    need_input_grad: bool,
) -> Result<ConvGrads<S>> {
    params.check_input(input)?;
    let s = input.shape();
    grad_out.expect_shape("conv2d backward", params.output_shape(s))?;

    let k = params.kernel();
    let plane = s.plane();
    let depth = s.c * k * k;
    let cout = params.out_channels();

    let mut grad_w = TensorT::zeros(params.weights.shape());
    let mut grad_b = vec![S::zero(); cout];
    let mut grad_in = need_input_grad.then(|| TensorT::zeros(s));
    let mut cols = if k == 1 { Vec::new() } else { vec![S::zero(); depth * plane] };
    let mut grad_cols = if k == 1 || !need_input_grad {
        Vec::new()
    } else {
        vec![S::zero(); depth * plane]
    };

    for n in 0..s.n {
        let g = grad_out.item(n);
        for (o, gb) in grad_b.iter_mut().enumerate() {
            *gb += g[o * plane..(o + 1) * plane].iter().copied().sum::<S>();
        }
        let src = input.item(n);
        let unrolled: &[S] = if k == 1 {
            src
        } else {
            im2col(src, s.c, s.h, s.w, k, &mut cols);
            &cols
        };
        // dW += dY · colsᵀ
        S::gemm(
            cout,
            plane,
            depth,
            g,
            (plane, 1),
            unrolled,
            (1, plane),
            S::one(),
            grad_w.data_mut(),
            (depth, 1),
        );
        if let Some(grad_in) = grad_in.as_mut() {
            // dCols = Wᵀ · dY
            let target: &mut [S] = if k == 1 { grad_in.item_mut(n) } else { &mut grad_cols };
            S::gemm(
                depth,
                cout,
                plane,
                params.weights.data(),
                (1, depth),
                g,
                (plane, 1),
                S::zero(),
                target,
                (plane, 1),
            );
            if k != 1 {
                col2im(&grad_cols, s.c, s.h, s.w, k, grad_in.item_mut(n));
            }
        }
    }

    Ok(ConvGrads {
        input: grad_in,
        weights: grad_w,
        bias: grad_b,
    })
}
