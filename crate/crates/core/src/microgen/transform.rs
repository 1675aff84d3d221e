//! Dataset augmentation and cover-layer erasure.

use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use super::phase::{reskin, Phase, NO_PARTICLE};
use super::polygon::PolygonParticle;
use super::{MicrogenError, Microstructure};
use crate::grid::Grid;
use crate::scenario::Scenario;

/// Pixel-exact symmetry of the cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Augmentation {
    Identity,
    /// `k` counter-clockwise quarter turns.
    Rot90(u8),
    /// Mirror left-right.
    FlipH,
    /// Mirror top-bottom.
    FlipV,
    /// Circular shift: the pixel at `(r, c)` moves to `(r + dy, c + dx)`.
    Shift {
        dy: isize,
        dx: isize,
    },
}

impl Augmentation {
    pub fn inverse(self) -> Self {
        match self {
            Augmentation::Rot90(k) => Augmentation::Rot90((4 - k % 4) % 4),
            Augmentation::Shift { dy, dx } => Augmentation::Shift { dy: -dy, dx: -dx },
            other => other,
        }
    }

    /// The drying surface breaks vertical symmetry, so the semi-periodic cell
    /// only admits left-right mirroring and horizontal shifts.
    pub fn admitted_by(self, scenario: Scenario) -> bool {
        match scenario {
            Scenario::Uniform => true,
            Scenario::NonUniform => match self {
                Augmentation::Identity | Augmentation::FlipH => true,
                Augmentation::Rot90(k) => k % 4 == 0,
                Augmentation::Shift { dy, .. } => dy == 0,
                Augmentation::FlipV => false,
            },
        }
    }

    pub fn apply_grid<T: Clone>(self, g: &Grid<T>) -> Grid<T> {
        match self {
            Augmentation::Identity => g.clone(),
            Augmentation::Rot90(k) => g.rot90(k),
            Augmentation::FlipH => g.flip_h(),
            Augmentation::FlipV => g.flip_v(),
            Augmentation::Shift { dy, dx } => g.shift(dy, dx),
        }
    }

    /// Continuous counterpart of [`apply_grid`](Self::apply_grid) on an
    /// `h × w` pixel cell with the given pitch.
    fn apply_point(self, p: Vec2, h: usize, w: usize, pitch: f64) -> Vec2 {
        let (hm, wm) = (h as f64 * pitch, w as f64 * pitch);
        match self {
            Augmentation::Identity => p,
            Augmentation::Rot90(k) => {
                let (mut q, mut cw) = (p, wm);
                let mut ch = hm;
                for _ in 0..k % 4 {
                    q = Vec2::new(q.y, cw - q.x);
                    std::mem::swap(&mut cw, &mut ch);
                }
                q
            }
            Augmentation::FlipH => Vec2::new(wm - p.x, p.y),
            Augmentation::FlipV => Vec2::new(p.x, hm - p.y),
            Augmentation::Shift { dy, dx } => Vec2::new(p.x + dx as f64 * pitch, p.y + dy as f64 * pitch),
        }
    }

    fn reverses_orientation(self) -> bool {
        matches!(self, Augmentation::FlipH | Augmentation::FlipV)
    }
}

/// Applies `op` identically to every channel of an aligned stack.
pub fn augment<T: Clone>(
    stack: &[Grid<T>],
    op: Augmentation,
    scenario: Scenario,
) -> Result<Vec<Grid<T>>, MicrogenError> {
    if !op.admitted_by(scenario) {
        return Err(MicrogenError::IllegalAugmentation { op, scenario });
    }
    Ok(stack.iter().map(|g| op.apply_grid(g)).collect())
}

impl Microstructure {
    /// Transforms the phase raster, labels and particle geometry together.
    pub fn augmented(&self, op: Augmentation) -> Result<Microstructure, MicrogenError> {
        if !op.admitted_by(self.scenario) {
            return Err(MicrogenError::IllegalAugmentation {
                op,
                scenario: self.scenario,
            });
        }
        let (h, w, pitch) = (self.phase.height(), self.phase.width(), self.phase.pitch);
        let codes = op.apply_grid(&self.phase.codes);
        let (nh, nw) = (codes.height() as f64 * pitch, codes.width() as f64 * pitch);
        let wrap = self.scenario.wrap();
        let particles = self
            .particles
            .iter()
            .map(|p| {
                let c = op.apply_point(p.center, h, w, pitch);
                // Keep centres inside the cell on periodic axes.
                let mut shift = Vec2::default();
                if wrap.x {
                    shift.x = c.x.rem_euclid(nw) - c.x;
                }
                if wrap.y {
                    shift.y = c.y.rem_euclid(nh) - c.y;
                }
                let mut vertices: Vec<Vec2> = p
                    .vertices
                    .iter()
                    .map(|&v| op.apply_point(v, h, w, pitch) + shift)
                    .collect();
                if op.reverses_orientation() {
                    vertices.reverse();
                }
                PolygonParticle {
                    center: c + shift,
                    vertices,
                    radius: p.radius,
                    diameter_mm: p.diameter_mm,
                }
            })
            .collect();
        Ok(Microstructure {
            phase: self.phase.with_codes(codes),
            labels: op.apply_grid(&self.labels),
            particles,
            scenario: self.scenario,
            seed: self.seed,
            class_diameters: self.class_diameters.clone(),
        })
    }
}

/// Replaces aggregate and ITZ in the bottom `thickness_px` rows (the drying
/// surface) with mortar and re-derives the ITZ around what remains.
///
/// Aggregate cut by the band gets its one-pixel skin on its own side: cut
/// pixels in the row just above the band turn into ITZ, so the band itself
/// stays pure mortar. Particle geometry is kept as generated; only the
/// rasters change.
pub fn erase_outer_layer(micro: &Microstructure, thickness_px: usize) -> Microstructure {
    let h = micro.phase.height();
    assert!(thickness_px < h, "erased layer must leave at least one row");
    if thickness_px == 0 {
        return micro.clone();
    }
    let first = h - thickness_px;
    let w = micro.phase.width();
    let mut codes = micro.phase.codes.clone();
    let mut labels = micro.labels.clone();
    for r in first..h {
        for c in 0..w {
            codes.set(r, c, Phase::Mortar);
            labels.set(r, c, NO_PARTICLE);
        }
    }
    let mut exposed = Vec::new();
    for c in 0..w {
        if *codes.get(first - 1, c) == Phase::Aggregate {
            exposed.push(c);
            codes.set(first - 1, c, Phase::Mortar);
            labels.set(first - 1, c, NO_PARTICLE);
        }
    }
    reskin(&mut codes, micro.scenario.wrap());
    for r in first..h {
        for c in 0..w {
            codes.set(r, c, Phase::Mortar);
        }
    }
    for c in exposed {
        codes.set(first - 1, c, Phase::Itz);
    }
    Microstructure {
        phase: micro.phase.with_codes(codes),
        labels,
        ..micro.clone()
    }
}
