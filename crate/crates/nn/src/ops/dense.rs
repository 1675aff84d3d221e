use crate::ops::conv::ParamGrads;
use crate::real::{gemm, Mat, Real};
use crate::tensor::Tensor;
use crate::NnError;

/// Channel-wise stack of `a` then `b`.
pub fn concat<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let [n, ca, h, w] = a.dims();
    let [nb, cb, hb, wb] = b.dims();
    if (n, h, w) != (nb, hb, wb) {
        return Err(NnError::DimMismatch(format!(
            "concat {:?} with {:?}",
            a.dims(),
            b.dims()
        )));
    }
    let mut data = Vec::with_capacity(a.len() + b.len());
    for item in 0..n {
        data.extend_from_slice(a.item(item));
        data.extend_from_slice(b.item(item));
    }
    Tensor::from_vec([n, ca + cb, h, w], data)
}

pub fn concat_backward<T: Real>(dy: &Tensor<T>, ca: usize) -> (Tensor<T>, Tensor<T>) {
    let [n, c, h, w] = dy.dims();
    let split = ca * h * w;
    let mut da = Vec::with_capacity(n * split);
    let mut db = Vec::with_capacity(n * (c - ca) * h * w);
    for item in 0..n {
        let g = dy.item(item);
        da.extend_from_slice(&g[..split]);
        db.extend_from_slice(&g[split..]);
    }
    (
        Tensor::from_vec([n, ca, h, w], da).unwrap(),
        Tensor::from_vec([n, c - ca, h, w], db).unwrap(),
    )
}

/// `y = W x + b` per batch item on the flattened input; `W` is `outputs × inputs`.
pub fn dense<T: Real>(x: &Tensor<T>, w: &[T], b: &[T]) -> Result<Tensor<T>, NnError> {
    let n = x.batch();
    let f = x.item_len();
    let out = b.len();
    if w.len() != out * f {
        return Err(NnError::DimMismatch(format!(
            "dense: {f} inputs against a {} × {out} weight",
            w.len() / out.max(1)
        )));
    }
    let mut y = Tensor::zeros([n, out, 1, 1]);
    for item in 0..n {
        y.item_mut(item).copy_from_slice(b);
    }
    gemm(Mat::new(x.data(), n, f), Mat::new(w, out, f).t(), T::ONE, y.data_mut());
    Ok(y)
}

pub fn dense_backward<T: Real>(x: &Tensor<T>, w: &[T], dy: &Tensor<T>) -> (Tensor<T>, ParamGrads<T>) {
    let n = x.batch();
    let f = x.item_len();
    let out = dy.channels();
    let mut dx = Tensor::zeros(x.dims());
    gemm(Mat::new(dy.data(), n, out), Mat::new(w, out, f), T::ZERO, dx.data_mut());
    let mut dw = vec![T::ZERO; out * f];
    gemm(
        Mat::new(dy.data(), n, out).t(),
        Mat::new(x.data(), n, f),
        T::ZERO,
        &mut dw,
    );
    let mut db = vec![T::ZERO; out];
    for item in 0..n {
        for (d, &g) in db.iter_mut().zip(dy.item(item)) {
            *d += g;
        }
    }
    (dx, ParamGrads { dw, db })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_self_doubles_channels() {
        let x = Tensor::<f64>::from_fn([2, 3, 2, 2], |[n, c, y, x]| (n * 12 + c * 4 + y * 2 + x) as f64);
        let y = concat(&x, &x).unwrap();
        assert_eq!(y.dims(), [2, 6, 2, 2]);
        for n in 0..2 {
            assert_eq!(&y.item(n)[..12], x.item(n));
            assert_eq!(&y.item(n)[12..], x.item(n));
        }
        let (a, b) = concat_backward(&y, 3);
        assert_eq!((a, b), (x.clone(), x));
    }

    #[test]
    fn identity_dense() {
        let x = Tensor::<f64>::from_fn([2, 3, 1, 1], |[n, c, _, _]| (n * 3 + c) as f64 + 0.5);
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        assert_eq!(dense(&x, &w, &[0.0; 3]).unwrap(), x);
        assert!(dense(&x, &w[..6], &[0.0; 3]).is_err());
    }
}
