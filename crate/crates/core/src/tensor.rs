//! Dense rank-4 tensors in NCHW order (width fastest).

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Batch × channels × height × width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Shape { n, c, h, w }
    }

    pub const fn len(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements in one spatial plane.
    pub const fn plane(&self) -> usize {
        self.h * self.w
    }

    /// Elements in one batch item.
    pub const fn item(&self) -> usize {
        self.c * self.h * self.w
    }

    pub const fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.c, self.h, self.w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorT<S> {
    shape: Shape,
    data: Vec<S>,
}

impl<S: Scalar> TensorT<S> {
    pub fn zeros(shape: Shape) -> Self {
        TensorT {
            shape,
            data: vec![S::zero(); shape.len()],
        }
    }

    pub fn filled(shape: Shape, value: S) -> Self {
        TensorT {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<S>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                op: "tensor construction",
                expected: format!("{} elements for {shape}", shape.len()),
                actual: format!("{} elements", data.len()),
            });
        }
        Ok(TensorT { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, n: usize, c: usize, y: usize, x: usize) -> S {
        self.data[self.shape.index(n, c, y, x)]
    }

    pub fn set(&mut self, n: usize, c: usize, y: usize, x: usize, value: S) {
        let i = self.shape.index(n, c, y, x);
        self.data[i] = value;
    }

    /// Contiguous slice for one batch item.
    pub fn item(&self, n: usize) -> &[S] {
        let len = self.shape.item();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn item_mut(&mut self, n: usize) -> &mut [S] {
        let len = self.shape.item();
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        TensorT {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element-type conversion (e.g. `f32` → `f64` for gradient checking).
    pub fn cast<T: Scalar>(&self) -> TensorT<T> {
        TensorT {
            shape: self.shape,
            data: self
                .data
                .iter()
                .map(|&v| T::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        }
    }

    /// Stacks single-item tensors of identical per-item shape into one batch.
    pub fn stack(items: &[&TensorT<S>]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::invalid("cannot stack an empty list of tensors"))?;
        let per = Shape { n: 0, ..first.shape };
        let mut data = Vec::with_capacity(items.iter().map(|t| t.len()).sum());
        let mut n = 0;
        for t in items {
            if (t.shape.c, t.shape.h, t.shape.w) != (per.c, per.h, per.w) {
                return Err(Error::ShapeMismatch {
                    op: "stack",
                    expected: format!("(*, {}, {}, {})", per.c, per.h, per.w),
                    actual: t.shape.to_string(),
                });
            }
            data.extend_from_slice(&t.data);
            n += t.shape.n;
        }
        Ok(TensorT {
            shape: Shape { n, ..per },
            data,
        })
    }

    pub(crate) fn expect_shape(&self, op: &'static str, expected: Shape) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                op,
                expected: expected.to_string(),
                actual: self.shape.to_string(),
            });
        }
        Ok(())
    }
}
