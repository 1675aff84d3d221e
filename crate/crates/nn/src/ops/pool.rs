use crate::real::Real;
use crate::tensor::Tensor;
use crate::NnError;

fn check_even<T: Real>(x: &Tensor<T>) -> Result<(), NnError> {
    if x.height() % 2 != 0 || x.width() % 2 != 0 {
        return Err(NnError::OddDims {
            height: x.height(),
            width: x.width(),
        });
    }
    Ok(())
}

/// Offset of the winning element of each 2 × 2 block (first index on ties).
fn argmax_block<T: Real>(plane: &[T], w: usize, i: usize, j: usize) -> usize {
    let base = 2 * i * w + 2 * j;
    let mut best = base;
    for o in [base + 1, base + w, base + w + 1] {
        if plane[o] > plane[best] {
            best = o;
        }
    }
    best
}

pub fn maxpool2x2<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    check_even(x)?;
    let [n, c, h, w] = x.dims();
    let (ho, wo) = (h / 2, w / 2);
    let mut y = Tensor::zeros([n, c, ho, wo]);
    for b in 0..n {
        for ch in 0..c {
            let src = x.plane(b, ch);
            let dst = y.plane_mut(b, ch);
            for i in 0..ho {
                for j in 0..wo {
                    dst[i * wo + j] = src[argmax_block(src, w, i, j)];
                }
            }
        }
    }
    Ok(y)
}

pub fn maxpool2x2_backward<T: Real>(x: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let [n, c, _, w] = x.dims();
    let (ho, wo) = (dy.height(), dy.width());
    let mut dx = Tensor::zeros(x.dims());
    for b in 0..n {
        for ch in 0..c {
            let g = dy.plane(b, ch);
            let winners: Vec<usize> = {
                let src = x.plane(b, ch);
                (0..ho * wo).map(|k| argmax_block(src, w, k / wo, k % wo)).collect()
            };
            let dst = dx.plane_mut(b, ch);
            for (k, o) in winners.into_iter().enumerate() {
                dst[o] += g[k];
            }
        }
    }
    dx
}

pub fn avgpool2x2<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    check_even(x)?;
    let [n, c, h, w] = x.dims();
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::from_f64(0.25);
    let mut y = Tensor::zeros([n, c, ho, wo]);
    for b in 0..n {
        for ch in 0..c {
            let src = x.plane(b, ch);
            let dst = y.plane_mut(b, ch);
            for i in 0..ho {
                for j in 0..wo {
                    let o = 2 * i * w + 2 * j;
                    dst[i * wo + j] = (src[o] + src[o + 1] + src[o + w] + src[o + w + 1]) * quarter;
                }
            }
        }
    }
    Ok(y)
}

pub fn avgpool2x2_backward<T: Real>(dy: &Tensor<T>, in_dims: [usize; 4]) -> Tensor<T> {
    let [n, c, _, w] = in_dims;
    let (ho, wo) = (dy.height(), dy.width());
    let quarter = T::from_f64(0.25);
    let mut dx = Tensor::zeros(in_dims);
    for b in 0..n {
        for ch in 0..c {
            let g = dy.plane(b, ch);
            let dst = dx.plane_mut(b, ch);
            for i in 0..ho {
                for j in 0..wo {
                    let v = g[i * wo + j] * quarter;
                    let o = 2 * i * w + 2 * j;
                    for p in [o, o + 1, o + w, o + w + 1] {
                        dst[p] += v;
                    }
                }
            }
        }
    }
    dx
}
