use serde::{Deserialize, Serialize};

use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PadMode {
    /// Wrap-around copy.
    Periodic,
    /// Copy of the nearest edge value.
    Replicate,
    Zero,
}

impl PadMode {
    /// Source index for padded coordinate `i` on an axis of length `n`.
    fn source(self, i: isize, n: usize) -> Option<usize> {
        if (0..n as isize).contains(&i) {
            return Some(i as usize);
        }
        match self {
            PadMode::Periodic => Some(i.rem_euclid(n as isize) as usize),
            PadMode::Replicate => Some(i.clamp(0, n as isize - 1) as usize),
            PadMode::Zero => None,
        }
    }
}

/// Per-axis padding: `x` acts on columns, `y` on rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Padding {
    pub x: PadMode,
    pub y: PadMode,
}

impl Padding {
    pub const PERIODIC: Padding = Padding {
        x: PadMode::Periodic,
        y: PadMode::Periodic,
    };
    pub const ZERO: Padding = Padding {
        x: PadMode::Zero,
        y: PadMode::Zero,
    };

    fn sources(self, h: usize, w: usize, width: usize) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
        let p = width as isize;
        let rows = (-p..h as isize + p).map(|i| self.y.source(i, h)).collect();
        let cols = (-p..w as isize + p).map(|i| self.x.source(i, w)).collect();
        (rows, cols)
    }
}

pub fn pad<T: Real>(x: &Tensor<T>, mode: Padding, width: usize) -> Tensor<T> {
    if width == 0 {
        return x.clone();
    }
    let [n, c, h, w] = x.dims();
    let (rows, cols) = mode.sources(h, w, width);
    let (ho, wo) = (rows.len(), cols.len());
    let mut y = Tensor::zeros([n, c, ho, wo]);
    for b in 0..n {
        for ch in 0..c {
            let src = x.plane(b, ch);
            let dst = y.plane_mut(b, ch);
            for (r, sr) in rows.iter().enumerate() {
                let Some(sr) = *sr else { continue };
                let out = &mut dst[r * wo..(r + 1) * wo];
                let row = &src[sr * w..(sr + 1) * w];
                for (o, sc) in out.iter_mut().zip(&cols) {
                    if let Some(sc) = sc {
                        *o = row[*sc];
                    }
                }
            }
        }
    }
    y
}

/// Adjoint of [`pad`]: every padded copy sends its gradient back to its source.
pub fn pad_backward<T: Real>(dy: &Tensor<T>, mode: Padding, width: usize, in_dims: [usize; 4]) -> Tensor<T> {
    if width == 0 {
        return dy.clone();
    }
    let [n, c, h, w] = in_dims;
    let (rows, cols) = mode.sources(h, w, width);
    let wo = cols.len();
    let mut dx = Tensor::zeros(in_dims);
    for b in 0..n {
        for ch in 0..c {
            let g = dy.plane(b, ch);
            let dst = dx.plane_mut(b, ch);
            for (r, sr) in rows.iter().enumerate() {
                let Some(sr) = *sr else { continue };
                for (col, sc) in cols.iter().enumerate() {
                    if let Some(sc) = sc {
                        dst[sr * w + sc] += g[r * wo + col];
                    }
                }
            }
        }
    }
    dx
}

/// Window `[top, top + height) × [left, left + width)` of every plane.
pub fn crop<T: Real>(x: &Tensor<T>, top: usize, left: usize, height: usize, width: usize) -> Tensor<T> {
    let [n, c, _, w] = x.dims();
    let mut y = Tensor::zeros([n, c, height, width]);
    for b in 0..n {
        for ch in 0..c {
            let src = x.plane(b, ch);
            let dst = y.plane_mut(b, ch);
            for r in 0..height {
                let s = (top + r) * w + left;
                dst[r * width..(r + 1) * width].copy_from_slice(&src[s..s + width]);
            }
        }
    }
    y
}

pub fn crop_backward<T: Real>(dy: &Tensor<T>, top: usize, left: usize, in_dims: [usize; 4]) -> Tensor<T> {
    let [n, c, _, w] = in_dims;
    let (height, width) = (dy.height(), dy.width());
    let mut dx = Tensor::zeros(in_dims);
    for b in 0..n {
        for ch in 0..c {
            let g = dy.plane(b, ch);
            let dst = dx.plane_mut(b, ch);
            for r in 0..height {
                let s = (top + r) * w + left;
                dst[s..s + width].copy_from_slice(&g[r * width..(r + 1) * width]);
            }
        }
    }
    dx
}
