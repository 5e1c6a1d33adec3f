//! 2×2 max-pooling with stride 2.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, TensorT};

fn check(input: Shape) -> Result<Shape> {
    if input.h % 2 != 0 || input.w % 2 != 0 {
        return Err(Error::invalid(format!(
            "max-pool needs even spatial dimensions, got {input}"
        )));
    }
    Ok(Shape::new(input.n, input.c, input.h / 2, input.w / 2))
}

/// Flat index of the window maximum; the first element in row-major
/// order wins ties.
fn window_argmax<S: Scalar>(plane: &[S], w: usize, oy: usize, ox: usize) -> usize {
    let base = 2 * oy * w + 2 * ox;
    let mut best = base;
    for idx in [base + 1, base + w, base + w + 1] {
        if plane[idx] > plane[best] {
            best = idx;
        }
    }
    best
}

pub fn maxpool2<S: Scalar>(input: &TensorT<S>) -> Result<TensorT<S>> {
    let s = input.shape();
    let os = check(s)?;
    let mut out = TensorT::zeros(os);
    let (plane, oplane) = (s.plane(), os.plane());
    for p in 0..s.n * s.c {
        let src = &input.data()[p * plane..(p + 1) * plane];
        let dst = &mut out.data_mut()[p * oplane..(p + 1) * oplane];
        for oy in 0..os.h {
            for ox in 0..os.w {
                dst[oy * os.w + ox] = src[window_argmax(src, s.w, oy, ox)];
            }
        }
    }
    Ok(out)
}

/// Routes each upstream gradient to its window's argmax.
pub fn maxpool2_backward<S: Scalar>(input: &TensorT<S>, grad_out: &TensorT<S>) -> Result<TensorT<S>> {
    let s = input.shape();
    let os = check(s)?;
    grad_out.expect_shape("max-pool backward", os)?;
    let mut grad = TensorT::zeros(s);
    let (plane, oplane) = (s.plane(), os.plane());
    for p in 0..s.n * s.c {
        let src = &input.data()[p * plane..(p + 1) * plane];
        let g = &grad_out.data()[p * oplane..(p + 1) * oplane];
        let dst = &mut grad.data_mut()[p * plane..(p + 1) * plane];
        for oy in 0..os.h {
            for ox in 0..os.w {
                dst[window_argmax(src, s.w, oy, ox)] += g[oy * os.w + ox];
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(v: [f32; 4]) -> TensorT<f32> {
        TensorT::from_vec(Shape::new(1, 1, 2, 2), v.to_vec()).unwrap()
    }

    #[test]
    fn picks_window_max() {
        assert_eq!(maxpool2(&square([1.0, 2.0, 3.0, 4.0])).unwrap().data(), &[4.0]);
    }

    #[test]
    fn backward_routes_to_argmax() {
        let g = TensorT::filled(Shape::new(1, 1, 1, 1), 5.0);
        let grad = maxpool2_backward(&square([1.0, 2.0, 3.0, 4.0]), &g).unwrap();
        assert_eq!(grad.data(), &[0.0, 0.0, 0.0, 5.0]);
    }

    #[test]
    fn ties_go_to_first_index() {
        let g = TensorT::filled(Shape::new(1, 1, 1, 1), 1.0);
        let grad = maxpool2_backward(&square([2.0, 7.0, 7.0, 7.0]), &g).unwrap();
        assert_eq!(grad.data(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn halves_table_resolution() {
        let out = maxpool2(&TensorT::<f32>::zeros(Shape::new(1, 1, 416, 416))).unwrap();
        assert_eq!(out.shape(), Shape::new(1, 1, 208, 208));
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(maxpool2(&TensorT::<f32>::zeros(Shape::new(1, 1, 3, 4))).is_err());
    }
}
