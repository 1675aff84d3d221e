use crate::real::Real;
use crate::tensor::Tensor;

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::ZERO { v } else { T::ZERO })
}

/// Gradient is taken as zero at the kink.
pub fn relu_backward<T: Real>(x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    zip(x, dy, |v, g| if v > T::ZERO { g } else { T::ZERO })
}

pub fn sigmoid_scalar<T: Real>(v: T) -> T {
    if v >= T::ZERO {
        T::ONE / (T::ONE + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::ONE + e)
    }
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

/// Uses the forward output `y`.
pub fn sigmoid_backward<T: Real>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    zip(y, dy, |s, g| g * s * (T::ONE - s))
}

/// `ln(1 + eˣ)` as `max(x, 0) + ln(1 + e^−|x|)`, finite for any finite `x`.
pub fn softplus_scalar<T: Real>(v: T) -> T {
    let pos = if v > T::ZERO { v } else { T::ZERO };
    pos + (-v.abs()).exp().ln_1p()
}

pub fn softplus<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(softplus_scalar)
}

pub fn softplus_backward<T: Real>(x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    zip(x, dy, |v, g| g * sigmoid_scalar(v))
}

fn zip<T: Real>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    assert_eq!(a.dims(), b.dims());
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.dims(), data).unwrap()
}
