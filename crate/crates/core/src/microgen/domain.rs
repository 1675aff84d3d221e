use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use crate::scenario::Wrap;

/// Raster extent with physical pitch and periodicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub height: usize,
    pub width: usize,
    /// Millimetres per pixel.
    pub pitch: f64,
    pub wrap: Wrap,
}

impl Domain {
    pub fn new(height: usize, width: usize, pitch: f64, wrap: Wrap) -> Self {
        Self {
            height,
            width,
            pitch,
            wrap,
        }
    }

    pub fn width_mm(&self) -> f64 {
        self.width as f64 * self.pitch
    }

    pub fn height_mm(&self) -> f64 {
        self.height as f64 * self.pitch
    }

    pub fn n_pixels(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn pixel_center(&self, r: usize, c: usize) -> Vec2 {
        Vec2::new((c as f64 + 0.5) * self.pitch, (r as f64 + 0.5) * self.pitch)
    }

    /// Translations under which geometry repeats (always includes zero).
    pub fn image_offsets(&self) -> Vec<Vec2> {
        let xs: &[f64] = if self.wrap.x { &[-1.0, 0.0, 1.0] } else { &[0.0] };
        let ys: &[f64] = if self.wrap.y { &[-1.0, 0.0, 1.0] } else { &[0.0] };
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &ky in ys {
            for &kx in xs {
                out.push(Vec2::new(kx * self.width_mm(), ky * self.height_mm()));
            }
        }
        out
    }

    /// Pixel indices whose centres fall in the (possibly wrapped) box.
    pub fn pixels_in_box(&self, min: Vec2, max: Vec2, mut f: impl FnMut(usize, usize)) {
        let p = self.pitch;
        let r0 = ((min.y / p) - 0.5).ceil() as isize;
        let r1 = ((max.y / p) - 0.5).floor() as isize;
        let c0 = ((min.x / p) - 0.5).ceil() as isize;
        let c1 = ((max.x / p) - 0.5).floor() as isize;
        for r in r0..=r1 {
            let Some(rr) = crate::grid::wrap_coord(r, self.height, self.wrap.y) else {
                continue;
            };
            for c in c0..=c1 {
                let Some(cc) = crate::grid::wrap_coord(c, self.width, self.wrap.x) else {
                    continue;
                };
                f(rr, cc);
            }
        }
    }
}
