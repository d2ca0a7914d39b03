use crate::error::{Error, Result};

use super::{Real, Volume};

pub fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

pub fn relu_volume<T: Real>(input: &Volume<T>) -> Volume<T> {
    input.map(relu)
}

/// `weights` is row-major `(out, in)`.
pub fn linear_forward<T: Real>(input: &[T], weights: &[T], bias: &[T]) -> Result<Vec<T>> {
    let out = bias.len();
    if out == 0 {
        return Err(Error::dim("linear.bias", 1, 0));
    }
    if weights.len() != out * input.len() {
        return Err(Error::dim("linear.weight", out * input.len(), weights.len()));
    }
    Ok(weights
        .chunks(input.len().max(1))
        .zip(bias)
        .map(|(row, &b)| row.iter().zip(input).fold(b, |acc, (&w, &x)| acc + w * x))
        .collect())
}
