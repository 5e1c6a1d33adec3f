use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::TensorT;

pub const LEAKY_SLOPE: f64 = 0.1;

pub fn leaky_relu<S: Scalar>(input: &TensorT<S>, slope: S) -> TensorT<S> {
    input.map(|x| if x > S::zero() { x } else { slope * x })
}

pub fn leaky_relu_backward<S: Scalar>(
    input: &TensorT<S>,
    grad_out: &TensorT<S>,
    slope: S,
) -> Result<TensorT<S>> {
    grad_out.expect_shape("leaky relu backward", input.shape())?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > S::zero() { g } else { slope * g })
        .collect();
    TensorT::from_vec(input.shape(), data)
}
