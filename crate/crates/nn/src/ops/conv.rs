//! Valid `k × k` cross-correlation (callers pad first) and the stride-2
//! transposed convolution, both lowered to matrix products.

use crate::real::{gemm, Mat, Real};
use crate::tensor::Tensor;
use crate::NnError;

/// Parameter gradients of a layer with a weight and a bias.
pub struct ParamGrads<T> {
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

fn im2col<T: Real>(src: &[T], c: usize, h: usize, w: usize, k: usize, col: &mut [T]) {
    let (ho, wo) = (h - k + 1, w - k + 1);
    let hw = ho * wo;
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for dy in 0..k {
            for dx in 0..k {
                let row = &mut col[((ch * k + dy) * k + dx) * hw..][..hw];
                for y in 0..ho {
                    let s = (y + dy) * w + dx;
                    row[y * wo..(y + 1) * wo].copy_from_slice(&plane[s..s + wo]);
                }
            }
        }
    }
}

fn col2im<T: Real>(col: &[T], c: usize, h: usize, w: usize, k: usize, dst: &mut [T]) {
    let (ho, wo) = (h - k + 1, w - k + 1);
    let hw = ho * wo;
    for ch in 0..c {
        let plane = &mut dst[ch * h * w..(ch + 1) * h * w];
        for dy in 0..k {
            for dx in 0..k {
                let row = &col[((ch * k + dy) * k + dx) * hw..][..hw];
                for y in 0..ho {
                    let s = (y + dy) * w + dx;
                    for (d, &g) in plane[s..s + wo].iter_mut().zip(&row[y * wo..(y + 1) * wo]) {
                        *d += g;
                    }
                }
            }
        }
    }
}

fn check_conv<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &[T], k: usize) -> Result<(), NnError> {
    let [co, ci, kh, kw] = w.dims();
    if kh != k || kw != k || ci != x.channels() || b.len() != co {
        return Err(NnError::DimMismatch(format!(
            "conv{k}x{k}: input {:?}, weight {:?}, bias {}",
            x.dims(),
            w.dims(),
            b.len()
        )));
    }
    if x.height() < k || x.width() < k {
        return Err(NnError::DimMismatch(format!("conv{k}x{k} on {:?}", x.dims())));
    }
    Ok(())
}

/// `y[o] = b[o] + Σ_i w[o, i] ⋆ x[i]` without padding; weights are `[co, ci, k, k]`.
pub fn conv<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &[T], k: usize) -> Result<Tensor<T>, NnError> {
    check_conv(x, w, b, k)?;
    let [n, ci, h, wd] = x.dims();
    let co = w.dims()[0];
    let (ho, wo) = (h - k + 1, wd - k + 1);
    let hw = ho * wo;
    let kk = ci * k * k;
    let mut y = Tensor::zeros([n, co, ho, wo]);
    let mut col = if k == 1 { Vec::new() } else { vec![T::ZERO; kk * hw] };
    for item in 0..n {
        let src: &[T] = if k == 1 {
            x.item(item)
        } else {
            im2col(x.item(item), ci, h, wd, k, &mut col);
            &col
        };
        let out = y.item_mut(item);
        for (o, &bias) in b.iter().enumerate() {
            out[o * hw..(o + 1) * hw].iter_mut().for_each(|v| *v = bias);
        }
        gemm(Mat::new(w.data(), co, kk), Mat::new(src, kk, hw), T::ONE, out);
    }
    Ok(y)
}

pub fn conv_backward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, dy: &Tensor<T>, k: usize) -> (Tensor<T>, ParamGrads<T>) {
    let [n, ci, h, wd] = x.dims();
    let co = w.dims()[0];
    let hw = dy.height() * dy.width();
    let kk = ci * k * k;
    let mut dx = Tensor::zeros(x.dims());
    let mut dw = vec![T::ZERO; co * kk];
    let mut db = vec![T::ZERO; co];
    let mut col = vec![T::ZERO; kk * hw];
    let mut dcol = if k == 1 { Vec::new() } else { vec![T::ZERO; kk * hw] };
    for item in 0..n {
        let g = dy.item(item);
        for (o, d) in db.iter_mut().enumerate() {
            *d += g[o * hw..(o + 1) * hw].iter().copied().sum::<T>();
        }
        if k == 1 {
            col.copy_from_slice(x.item(item));
        } else {
            im2col(x.item(item), ci, h, wd, k, &mut col);
        }
        gemm(Mat::new(g, co, hw), Mat::new(&col, kk, hw).t(), T::ONE, &mut dw);
        if k == 1 {
            gemm(
                Mat::new(w.data(), co, kk).t(),
                Mat::new(g, co, hw),
                T::ZERO,
                dx.item_mut(item),
            );
        } else {
            gemm(Mat::new(w.data(), co, kk).t(), Mat::new(g, co, hw), T::ZERO, &mut dcol);
            col2im(&dcol, ci, h, wd, k, dx.item_mut(item));
        }
    }
    (dx, ParamGrads { dw, db })
}

/// Stride-2, 2 × 2 transposed convolution; weights are `[ci, co, 2, 2]`.
pub fn upconv2x2<T: Real>(x: &Tensor<T>, w: &Tensor<T>, b: &[T]) -> Result<Tensor<T>, NnError> {
    let [n, ci, h, wd] = x.dims();
    let [wci, co, kh, kw] = w.dims();
    if wci != ci || kh != 2 || kw != 2 || b.len() != co {
        return Err(NnError::DimMismatch(format!(
            "upconv2x2: input {:?}, weight {:?}, bias {}",
            x.dims(),
            w.dims(),
            b.len()
        )));
    }
    let hw = h * wd;
    let mut y = Tensor::zeros([n, co, 2 * h, 2 * wd]);
    let mut tmp = vec![T::ZERO; co * 4 * hw];
    for item in 0..n {
        gemm(
            Mat::new(w.data(), ci, co * 4).t(),
            Mat::new(x.item(item), ci, hw),
            T::ZERO,
            &mut tmp,
        );
        let out = y.item_mut(item);
        for o in 0..co {
            let plane = &mut out[o * 4 * hw..(o + 1) * 4 * hw];
            for a in 0..2 {
                for c in 0..2 {
                    let src = &tmp[(o * 4 + a * 2 + c) * hw..][..hw];
                    for i in 0..h {
                        for j in 0..wd {
                            plane[(2 * i + a) * 2 * wd + 2 * j + c] = src[i * wd + j] + b[o];
                        }
                    }
                }
            }
        }
    }
    Ok(y)
}

pub fn upconv2x2_backward<T: Real>(x: &Tensor<T>, w: &Tensor<T>, dy: &Tensor<T>) -> (Tensor<T>, ParamGrads<T>) {
    let [n, ci, h, wd] = x.dims();
    let co = w.dims()[1];
    let hw = h * wd;
    let mut dx = Tensor::zeros(x.dims());
    let mut dw = vec![T::ZERO; ci * co * 4];
    let mut db = vec![T::ZERO; co];
    let mut g = vec![T::ZERO; co * 4 * hw];
    for item in 0..n {
        let gy = dy.item(item);
        for o in 0..co {
            let plane = &gy[o * 4 * hw..(o + 1) * 4 * hw];
            db[o] += plane.iter().copied().sum::<T>();
            for a in 0..2 {
                for c in 0..2 {
                    let dst = &mut g[(o * 4 + a * 2 + c) * hw..][..hw];
                    for i in 0..h {
                        for j in 0..wd {
                            dst[i * wd + j] = plane[(2 * i + a) * 2 * wd + 2 * j + c];
                        }
                    }
                }
            }
        }
        gemm(
            Mat::new(w.data(), ci, co * 4),
            Mat::new(&g, co * 4, hw),
            T::ZERO,
            dx.item_mut(item),
        );
        gemm(
            Mat::new(x.item(item), ci, hw),
            Mat::new(&g, co * 4, hw).t(),
            T::ONE,
            &mut dw,
        );
    }
    (dx, ParamGrads { dw, db })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::pad::{pad, Padding};

    #[test]
    fn identity_kernel() {
        let x = Tensor::<f64>::from_fn([2, 1, 4, 5], |[n, _, y, x]| (n * 20 + y * 5 + x) as f64);
        let mut w = Tensor::zeros([1, 1, 3, 3]);
        w.set([0, 0, 1, 1], 1.0);
        let y = conv(&pad(&x, Padding::ZERO, 1), &w, &[0.0], 3).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_on_constant() {
        let x = Tensor::<f64>::filled([1, 1, 5, 5], 2.5);
        let w = Tensor::filled([1, 1, 3, 3], 1.0);
        let y = conv(&x, &w, &[0.0], 3).unwrap();
        assert_eq!(y.dims(), [1, 1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 22.5));
    }

    #[test]
    fn conv_matches_direct_sum() {
        let x = Tensor::<f64>::from_fn([1, 2, 4, 4], |[_, c, y, x]| ((c * 7 + y * 3 + x * 5) % 11) as f64 - 5.0);
        let w = Tensor::<f64>::from_fn([3, 2, 3, 3], |[o, i, a, b]| {
            ((o * 5 + i * 3 + a * 2 + b) % 7) as f64 - 3.0
        });
        let bias = [0.5, -1.0, 2.0];
        let y = conv(&x, &w, &bias, 3).unwrap();
        for o in 0..3 {
            for r in 0..2 {
                for c in 0..2 {
                    let mut s = bias[o];
                    for i in 0..2 {
                        for a in 0..3 {
                            for b in 0..3 {
                                s += w.at([o, i, a, b]) * x.at([0, i, r + a, c + b]);
                            }
                        }
                    }
                    assert_eq!(y.at([0, o, r, c]), s);
                }
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let x = Tensor::<f32>::zeros([1, 2, 4, 4]);
        assert!(conv(&x, &Tensor::zeros([1, 3, 3, 3]), &[0.0], 3).is_err());
        assert!(conv(&x, &Tensor::zeros([1, 2, 3, 3]), &[0.0, 0.0], 3).is_err());
        assert!(upconv2x2(&x, &Tensor::zeros([3, 1, 2, 2]), &[0.0]).is_err());
    }

    #[test]
    fn single_pixel_upconv() {
        let x = Tensor::<f64>::filled([1, 1, 1, 1], 3.0);
        let w = Tensor::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = upconv2x2(&x, &w, &[0.0]).unwrap();
        assert_eq!(y.data(), &[3.0, 6.0, 9.0, 12.0]);
    }
}
