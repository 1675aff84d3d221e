//! Row-major rasters shared by the generator, the solver and the metrics.
//!
//! Row 0 is the top of the image. Pixel `(r, c)` covers the square
//! `[c·p, (c+1)·p) × [r·p, (r+1)·p)` for pitch `p`, with `y` growing downward.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// Panics when `data.len() != height * width`.
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(
            data.len(),
            height * width,
            "raster data length does not match {height}x{width}"
        );
        Self { height, width, data }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, r: usize, c: usize) -> usize {
        debug_assert!(r < self.height && c < self.width);
        r * self.width + c
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.width + c]
    }

    #[inline]
    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.width + c] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.width..(r + 1) * self.width]
    }

    pub fn map<U: Clone>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Neighbour lookup with optional wrap-around per axis; `None` when the
    /// offset leaves a non-periodic axis.
    #[inline]
    pub fn neighbor(
        &self,
        r: usize,
        c: usize,
        dr: isize,
        dc: isize,
        wrap_y: bool,
        wrap_x: bool,
    ) -> Option<(usize, usize)> {
        let rr = wrap_coord(r as isize + dr, self.height, wrap_y)?;
        let cc = wrap_coord(c as isize + dc, self.width, wrap_x)?;
        Some((rr, cc))
    }

    /// Counter-clockwise rotation by `k` quarter turns.
    pub fn rot90(&self, k: u8) -> Self {
        let mut out = self.clone();
        for _ in 0..(k % 4) {
            out = out.rot90_once();
        }
        out
    }

    fn rot90_once(&self) -> Self {
        let (h, w) = (self.height, self.width);
        Grid::from_fn(w, h, |i, j| self.get(j, w - 1 - i).clone())
    }

    /// Mirror left-right.
    pub fn flip_h(&self) -> Self {
        Grid::from_fn(self.height, self.width, |r, c| self.get(r, self.width - 1 - c).clone())
    }

    /// Mirror top-bottom.
    pub fn flip_v(&self) -> Self {
        Grid::from_fn(self.height, self.width, |r, c| self.get(self.height - 1 - r, c).clone())
    }

    /// Circular shift: the value at `(r, c)` moves to `(r + dy, c + dx)`.
    pub fn shift(&self, dy: isize, dx: isize) -> Self {
        let (h, w) = (self.height as isize, self.width as isize);
        Grid::from_fn(self.height, self.width, |r, c| {
            let sr = (r as isize - dy).rem_euclid(h) as usize;
            let sc = (c as isize - dx).rem_euclid(w) as usize;
            self.get(sr, sc).clone()
        })
    }
}

#[inline]
pub(crate) fn wrap_coord(i: isize, n: usize, wrap: bool) -> Option<usize> {
    let n = n as isize;
    if (0..n).contains(&i) {
        Some(i as usize)
    } else if wrap {
        Some(i.rem_euclid(n) as usize)
    } else {
        None
    }
}
